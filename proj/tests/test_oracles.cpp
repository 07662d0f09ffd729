#include <doctest.h>

TEST_SUITE("oracles") {}
