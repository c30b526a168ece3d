#include "k2gof/k2gof.hpp"
#include "k2gof/cli.hpp"
#include <catch2/catch_amalgamated.hpp>
TEST_CASE("placeholder-sim") { CHECK(true); }
