from kripkeforge.main import *
