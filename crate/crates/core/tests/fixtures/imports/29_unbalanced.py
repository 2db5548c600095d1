import os
x = foo(
    1,
import re
def broken(:
    from json import (loads,
                      dumps)
import 3bad
from nowhere import
import sys  # trailing
