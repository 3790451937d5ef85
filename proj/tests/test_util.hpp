#pragma once

#include <filesystem>
#include <random>
#include <string>

namespace test_util {

/// Fresh, empty directory under the system temp path.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("diagno_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test_util
