import codecs
print "chain falls through"
s = ur"raw unicode"
from encodings import utf_8
