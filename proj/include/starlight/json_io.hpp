#pragma once

#include <string>

#include "json.hpp"

namespace starlight {

/// Insertion-ordered JSON everywhere: file output is deterministic and keeps
/// the field order of the writer.
using Json = nlohmann::ordered_json;

/// Parses a JSON file; Error("io") if unreadable, Error("parse") with the
/// parser's position context if malformed.
Json read_json_file(const std::string& path);

void write_json_file(const std::string& path, const Json& j, int indent = 2);

}  // namespace starlight
