#include <segrl/dataset.hpp>

#include <fstream>
#include <sstream>

namespace segrl {

Json DatasetRecord::to_json() const {
  Json j = Json::object();
  j["id"] = id;
  j["question"] = question;
  j["reference_answer"] = reference_answer;
  if (!meta.is_null() && !meta.empty()) j["meta"] = meta;
  return j;
}

DatasetRecord DatasetRecord::from_json(const Json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.reference_answer = j.at("reference_answer").get<std::string>();
  if (j.contains("meta")) r.meta = j.at("meta");
  if (r.id.empty()) throw std::invalid_argument("record id must be nonempty");
  if (r.question.empty()) throw std::invalid_argument("record question must be nonempty");
  if (r.reference_answer.empty())
    throw std::invalid_argument("record reference_answer must be nonempty");
  return r;
}

JsonlReadResult parse_jsonl(const std::string& text) {
  JsonlReadResult out;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Json j = Json::parse(line);
      DatasetRecord r = DatasetRecord::from_json(j);
      r.raw_line = line;
      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.malformed.push_back({line_no, e.what()});
    }
  }
  return out;
}

JsonlReadResult read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_jsonl(buf.str());
}

void write_jsonl(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path.string());
  for (const auto& r : records) {
    if (!r.raw_line.empty())
      out << r.raw_line << '\n';
    else
      out << r.to_json().dump() << '\n';
  }
}

}  // namespace segrl
