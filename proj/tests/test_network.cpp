#include <doctest.h>

TEST_SUITE("network") {}
