#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <doctest.h>

#include "dpface/error.hpp"

namespace dpface::test {

inline ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::DomainError;
}

#define CHECK_CODE(expr, expected) CHECK(::dpface::test::code_of([&] { (void)(expr); }) == (expected))

inline double rel_err(double got, double want)
{
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("dpface_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace dpface::test
