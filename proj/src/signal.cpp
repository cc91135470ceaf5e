#include "vitppg/signal.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace vitppg {

using nlohmann::json;

void PpgRecord::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw InvalidInput("record '" + id + "': fs must be positive");
  if (samples.size() == 0) throw InvalidInput("record '" + id + "': samples are empty");
  if (!samples.allFinite()) throw InvalidInput("record '" + id + "': non-finite sample");
}

std::string record_to_json_line(const PpgRecord& record) {
  json j;
  j["id"] = record.id;
  j["fs"] = record.fs;
  j["samples"] = std::vector<double>(record.samples.data(), record.samples.data() + record.samples.size());
  j["labels"] = json::object();
  for (const auto& [name, value] : record.labels) j["labels"][name] = value;
  return j.dump();
}

PpgRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  if (!j.is_object()) throw DataError("record is not an object");
  PpgRecord r;
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("missing string field 'id'");
  r.id = j["id"].get<std::string>();
  if (!j.contains("fs") || !j["fs"].is_number()) throw DataError("record '" + r.id + "': missing numeric field 'fs'");
  r.fs = j["fs"].get<double>();
  if (!j.contains("samples") || !j["samples"].is_array()) {
    throw DataError("record '" + r.id + "': missing array field 'samples'");
  }
  const auto& s = j["samples"];
  r.samples.resize(static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s[i].is_number()) throw DataError("record '" + r.id + "': non-numeric sample");
    r.samples(static_cast<Eigen::Index>(i)) = s[i].get<double>();
  }
  if (j.contains("labels")) {
    if (!j["labels"].is_object()) throw DataError("record '" + r.id + "': 'labels' must be an object");
    for (const auto& [name, value] : j["labels"].items()) {
      if (!value.is_number()) throw DataError("record '" + r.id + "': label '" + name + "' is not numeric");
      r.labels[name] = value.get<double>();
    }
  }
  try {
    r.validate();
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
  return r;
}

void write_records(std::ostream& os, const std::vector<PpgRecord>& records) {
  for (const auto& r : records) os << record_to_json_line(r) << '\n';
}

std::vector<PpgRecord> read_records(std::istream& is) {
  std::vector<PpgRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vitppg
