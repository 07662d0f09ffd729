#include <doctest.h>

TEST_SUITE("diffusion") {}
