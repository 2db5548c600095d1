import os
import sys, json
import os.path as osp
import xml.etree.ElementTree as ET, csv
