import operator
if 1 <> 2:
    from urllib2 import urlopen
