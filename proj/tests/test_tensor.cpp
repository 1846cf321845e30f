#include <doctest.h>

#include <cmath>

#include "rfdose/tensor.hpp"

using namespace rfdose;

TEST_CASE("concat and split are inverse") {
    Tensor a(2, 3, 4, 4), b(2, 5, 4, 4);
    for (std::size_t i = 0; i < a.size(); ++i) a.v[i] = static_cast<double>(i);
    for (std::size_t i = 0; i < b.size(); ++i) b.v[i] = -static_cast<double>(i);

    Tensor whole = concat_channels({&a, &b});
    CHECK(whole.c == 8);
    CHECK(whole.at(1, 2, 3, 3) == a.at(1, 2, 3, 3));
    CHECK(whole.at(1, 3, 0, 0) == b.at(1, 0, 0, 0));
    CHECK(whole.at(0, 7, 2, 1) == b.at(0, 4, 2, 1));

    auto parts = split_channels(whole, {3, 5});
    REQUIRE(parts.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(parts[0].v[i] == a.v[i]);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(parts[1].v[i] == b.v[i]);
}

TEST_CASE("concat rejects mismatched spatial shapes") {
    Tensor a(1, 2, 4, 4), b(1, 2, 8, 8);
    CHECK_THROWS_AS(concat_channels({&a, &b}), DomainError);
    Tensor c(1, 4, 4, 4);
    CHECK_THROWS_AS(split_channels(c, {3, 3}), DomainError);
}

TEST_CASE("check_finite flags bad activations") {
    Tensor t(1, 1, 2, 2);
    CHECK_NOTHROW(check_finite(t, "x"));
    t.v[2] = std::nan("");
    CHECK_THROWS_AS(check_finite(t, "x"), NumericError);
}
