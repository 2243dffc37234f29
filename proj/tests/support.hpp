#pragma once

// Shared fixtures for the test binaries.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lvseg/lvseg.hpp"

namespace lvseg::testing {

/// Default phantom, generated once per process.
inline const phantom::Phantom& default_phantom() {
    static const phantom::Phantom ph = phantom::generate(phantom::PhantomSpec{});
    return ph;
}

inline SlicePlane flat_slice(int w, int h, double value = 0.0) {
    SlicePlane s;
    s.pixels = Image2D(w, h);
    std::fill(s.pixels.data.begin(), s.pixels.data.end(), value);
    return s;
}

inline std::vector<Vec2> circle(const Vec2& c, double r, int n, double phase = 0.0) {
    std::vector<Vec2> out;
    for (int k = 0; k < n; ++k) {
        const double a = phase + 2.0 * std::numbers::pi * k / n;
        out.emplace_back(c.x() + r * std::cos(a), c.y() + r * std::sin(a));
    }
    return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("lvseg_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace lvseg::testing
