# Suite, Bethe root and CLI tests
