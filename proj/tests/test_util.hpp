#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

namespace testutil {

inline std::string fixture(const std::string& name) { return std::string(HOTA_FIXTURE_DIR) + "/" + name; }

inline bool have_fixture(const std::string& name) { return std::filesystem::exists(fixture(name)); }

#define REQUIRE_FIXTURE(name) \
    if (!testutil::have_fixture(name)) GTEST_SKIP() << "fixture " << name << " not present"

inline std::filesystem::path scratch_dir() {
    auto p = std::filesystem::temp_directory_path() /
             ("hota_tests_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(p);
    return p;
}

inline std::string write_file(const std::filesystem::path& p, const std::string& body) {
    std::ofstream(p) << body;
    return p.string();
}

}  // namespace testutil
