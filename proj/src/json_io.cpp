#include "starlight/json_io.hpp"

#include <fstream>

#include "starlight/error.hpp"

namespace starlight {

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open file: " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail("parse", path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j, int indent) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot open file for writing: " + path);
  out << j.dump(indent) << "\n";
  if (!out) fail("io", "write failed: " + path);
}

}  // namespace starlight
