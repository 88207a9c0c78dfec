#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "milkit/core.hpp"

namespace milkit {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError("malformed number '" + std::string(s) + "'", line);
  }
  if (!std::isfinite(v)) throw FormatError("non-finite feature value", line);
  return v;
}

std::optional<Label> parse_label(std::string_view s, std::size_t line) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s == "1" || s == "+1") return Label::Positive;
  if (s == "-1") return Label::Negative;
  throw FormatError("label must be 1, -1 or empty, got '" + std::string(s) + "'", line);
}

MILDataset load_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw FormatError("missing header row", 1);
  ++line_no;
  const auto header = split_commas(trim(line));
  if (header.size() < 3 || trim(header[0]) != "bag_id" || trim(header[1]) != "label") {
    throw FormatError("header must be 'bag_id,label,f1,...,fd'", line_no);
  }
  const std::size_t d = header.size() - 2;

  std::vector<Bag> bags;
  std::unordered_map<std::string, std::size_t> first_line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = trim(line);
    if (row.empty()) continue;
    const auto fields = split_commas(row);
    if (fields.size() != d + 2) {
      throw FormatError("expected " + std::to_string(d) + " features, found " +
                            std::to_string(fields.size() < 2 ? 0 : fields.size() - 2) +
                            " (inconsistent dimension)",
                        line_no);
    }
    std::string id(trim(fields[0]));
    if (id.empty()) throw FormatError("empty bag id", line_no);
    const auto label = parse_label(fields[1], line_no);
    Instance x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = parse_double(fields[j + 2], line_no);

    if (bags.empty() || bags.back().id != id) {
      if (first_line.count(id)) {
        throw FormatError("duplicate bag id '" + id + "' (first seen on line " +
                              std::to_string(first_line[id]) + ")",
                          line_no);
      }
      first_line.emplace(id, line_no);
      bags.push_back(Bag{id, {}, label});
    } else if (bags.back().label != label) {
      throw FormatError("label changes within bag '" + id + "'", line_no);
    }
    bags.back().instances.push_back(std::move(x));
  }
  return MILDataset(std::move(bags), d);
}

MILDataset load_jsonl(std::istream& in) {
  using nlohmann::json;
  std::string line;
  std::size_t line_no = 0;
  std::size_t d = 0;
  std::vector<Bag> bags;
  std::unordered_map<std::string, std::size_t> first_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("instances")) {
      throw FormatError("object needs 'id' and 'instances'", line_no);
    }
    Bag bag;
    if (!obj["id"].is_string()) throw FormatError("'id' must be a string", line_no);
    bag.id = obj["id"].get<std::string>();
    if (obj.contains("label") && !obj["label"].is_null()) {
      const json& l = obj["label"];
      if (!l.is_number_integer()) throw FormatError("'label' must be 1, -1 or null", line_no);
      const int v = l.get<int>();
      if (v == 1) bag.label = Label::Positive;
      else if (v == -1) bag.label = Label::Negative;
      else throw FormatError("'label' must be 1, -1 or null", line_no);
    }
    const json& inst = obj["instances"];
    if (!inst.is_array() || inst.empty()) throw FormatError("'instances' must be a nonempty array", line_no);
    for (const json& row : inst) {
      if (!row.is_array()) throw FormatError("instance must be an array of numbers", line_no);
      Instance x;
      x.reserve(row.size());
      for (const json& v : row) {
        if (!v.is_number()) throw FormatError("instance must be an array of numbers", line_no);
        x.push_back(v.get<double>());
      }
      if (d == 0) d = x.size();
      if (x.size() != d || d == 0) {
        throw FormatError("instance has " + std::to_string(x.size()) + " features, expected " +
                              std::to_string(d) + " (inconsistent dimension)",
                          line_no);
      }
      bag.instances.push_back(std::move(x));
    }
    if (auto [it, inserted] = first_line.emplace(bag.id, line_no); !inserted) {
      throw FormatError("duplicate bag id '" + bag.id + "' (first seen on line " +
                            std::to_string(it->second) + ")",
                        line_no);
    }
    bags.push_back(std::move(bag));
  }
  if (bags.empty()) throw FormatError("no bags in file", line_no + 1);
  return MILDataset(std::move(bags), d);
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FileFormat::Csv;
  if (ext == ".jsonl" || ext == ".json") return FileFormat::Jsonl;
  throw Error("cannot infer dataset format from '" + path.string() + "'");
}

MILDataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return format == FileFormat::Csv ? load_csv(in) : load_jsonl(in);
}

void save_dataset(const MILDataset& ds, const std::filesystem::path& path, FileFormat format) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");

  if (format == FileFormat::Csv) {
    out << "bag_id,label";
    for (std::size_t j = 1; j <= ds.dim(); ++j) out << ",f" << j;
    out << '\n';
    for (const Bag& bag : ds.bags()) {
      if (bag.id.find_first_of(",\n\r") != std::string::npos) {
        throw Error("bag id '" + bag.id + "' cannot be written to CSV");
      }
      const std::string label = bag.label ? std::to_string(to_int(*bag.label)) : "";
      for (const Instance& x : bag.instances) {
        out << bag.id << ',' << label;
        for (double v : x) out << ',' << format_double(v);
        out << '\n';
      }
    }
  } else {
    for (const Bag& bag : ds.bags()) {
      // Written by hand so every value carries 17 significant digits.
      out << "{\"id\":" << nlohmann::json(bag.id).dump() << ",\"label\":";
      if (bag.label) out << to_int(*bag.label);
      else out << "null";
      out << ",\"instances\":[";
      for (std::size_t k = 0; k < bag.size(); ++k) {
        out << (k ? ",[" : "[");
        for (std::size_t j = 0; j < bag.instances[k].size(); ++j) {
          out << (j ? "," : "") << format_double(bag.instances[k][j]);
        }
        out << ']';
      }
      out << "]}\n";
    }
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace milkit
