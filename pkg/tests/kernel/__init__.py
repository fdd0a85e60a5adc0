# q-kernel and sector tests
