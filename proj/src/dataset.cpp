#include "iotwl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "iotwl/errors.hpp"

namespace iotwl {

std::vector<std::string> LabeledDataset::class_names() const {
    std::set<std::string> s;
    for (const auto& r : rows)
        if (!r.label.empty()) s.insert(r.label);
    return {s.begin(), s.end()};
}

std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::logic_error("to_chars failed");
    return std::string(buf, p);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw MalformedFileError("bad numeric field: '" + s + "'");
    return v;
}

static std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t comma = line.find(',', pos);
        if (comma == std::string::npos) {
            out.push_back(line.substr(pos));
            return out;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
}

static void check_field(const std::string& s, const char* what) {
    if (s.find_first_of(",\"\n\r") != std::string::npos)
        throw InvalidSpecError(std::string(what) + " contains CSV delimiter: '" + s + "'");
}

void save_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write dataset: " + path);
    for (const auto& name : ds.schema.names) out << name << ',';
    out << "label,stream_id,start_time\n";
    for (const auto& r : ds.rows) {
        if (r.values.size() != ds.schema.size())
            throw SchemaMismatchError("row width does not match schema");
        check_field(r.label, "label");
        check_field(r.stream_id, "stream_id");
        for (double v : r.values) out << format_double(v) << ',';
        out << r.label << ',' << r.stream_id << ',' << format_double(r.start_time) << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open dataset: " + path);
    std::string line;
    if (!std::getline(in, line)) throw MalformedFileError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv(line);
    if (header.size() < 4 || header[header.size() - 3] != "label" ||
        header[header.size() - 2] != "stream_id" || header.back() != "start_time")
        throw MalformedFileError(path + ": expected ...,label,stream_id,start_time header");

    LabeledDataset ds;
    ds.schema.names.assign(header.begin(), header.end() - 3);
    size_t d = ds.schema.size();
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() != d + 3)
            throw MalformedFileError(path + ":" + std::to_string(lineno) + ": wrong column count");
        FeatureVector fv;
        fv.values.reserve(d);
        try {
            for (size_t i = 0; i < d; ++i) fv.values.push_back(parse_double(f[i]));
            fv.start_time = parse_double(f[d + 2]);
        } catch (const MalformedFileError& e) {
            throw MalformedFileError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        fv.label = f[d];
        fv.stream_id = f[d + 1];
        ds.rows.push_back(std::move(fv));
    }
    return ds;
}

} // namespace iotwl
