# Tests package for the qops library
