#pragma once

#include <segrl/types.hpp>

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace segrl {

using Json = nlohmann::ordered_json;

struct DatasetRecord {
  std::string id;
  std::string question;
  std::string reference_answer;
  Json meta = Json::object();
  // Original input line, kept verbatim so untouched records pass through
  // byte-identical.
  std::string raw_line;

  Json to_json() const;
  static DatasetRecord from_json(const Json& j);
};

struct JsonlParseIssue {
  long line_no = 0;  // 1-based
  std::string message;
};

struct JsonlReadResult {
  std::vector<DatasetRecord> records;
  std::vector<JsonlParseIssue> malformed;
};

JsonlReadResult read_jsonl(const std::filesystem::path& path);
JsonlReadResult parse_jsonl(const std::string& text);
void write_jsonl(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

}  // namespace segrl
