#include <doctest.h>

TEST_SUITE("likelihood") {}
