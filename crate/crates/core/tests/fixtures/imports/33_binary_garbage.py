 import zz
import after_garbage
�� from bad bytes
