#pragma once

#include <map>
#include <string>

namespace mobsim::gtfs {

// Minimal read-only zip support: stored and deflate entries, enough for
// GTFS archives. Returns entry name -> decompressed bytes.
// Throws std::runtime_error on a broken archive.
std::map<std::string, std::string> read_zip(const std::string& path);

bool looks_like_zip(const std::string& path);

}  // namespace mobsim::gtfs
