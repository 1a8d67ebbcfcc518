// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ddlab::fetch {

struct Archive {
    std::string file;
    std::string md5;
    std::vector<std::string> urls;  // tried in order
};

std::vector<Archive> archives_for(const std::string& dataset);

std::string md5_file(const std::filesystem::path& path);

// Downloads missing or corrupt archives into dir, verifies MD5 and unpacks
// the CIFAR-10 tarball. With verify_only nothing is downloaded; every
// archive must already be present and intact. Progress goes to stderr.
void fetch_dataset(const std::string& dataset, const std::filesystem::path& dir, bool verify_only,
                   const std::string& mirror = "");

// Extracts regular files of a .tar.gz into dir (flat names under their
// stored relative paths).
void extract_tar_gz(const std::filesystem::path& archive, const std::filesystem::path& dir);

} // namespace ddlab::fetch
