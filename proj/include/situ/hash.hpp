#pragma once

#include <string>

namespace situ {

// Lowercase hex SHA-256 digest.
std::string sha256_hex(const std::string& data);

}  // namespace situ
