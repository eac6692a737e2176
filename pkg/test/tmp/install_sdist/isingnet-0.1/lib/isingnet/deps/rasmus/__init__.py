# a directory must contain a __init__.py in order to be a python package
#
# trimmed copy of the rasmus library bundled with isingnet
