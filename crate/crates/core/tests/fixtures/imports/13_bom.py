﻿import uuid
from hashlib import sha256
