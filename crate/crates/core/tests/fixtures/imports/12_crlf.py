import os
from sys import (
    argv,
    path)
import time
