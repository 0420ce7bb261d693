#include "advkit/report.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace advkit {

const char* kResultsCsvHeader =
    "index,true_label,clean_pred,adv_pred,success,l2_norm,linf_norm,first_success_iter,loss,"
    "model,seed";

std::string format_float9(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

nlohmann::ordered_json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return nlohmann::ordered_json::parse(format_float9(v));
}

void write_results_csv(const std::vector<OutcomeRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: no newline translation
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << kResultsCsvHeader << "\n";
    for (const OutcomeRow& r : rows) {
        out << r.index << ',' << r.true_label << ',' << r.clean_pred << ',' << r.adv_pred << ','
            << (r.success ? 1 : 0) << ',' << format_float9(r.l2_norm) << ','
            << format_float9(r.linf_norm) << ',';
        if (r.first_success_iteration) out << *r.first_success_iteration;
        out << ',' << r.loss << ',' << r.model << ',' << r.seed << "\n";
    }
    if (!out) throw IoError("write failure on " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

std::vector<OutcomeRow> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (line != kResultsCsvHeader)
        throw FormatError(path + ": unexpected CSV header '" + line + "'");
    std::vector<OutcomeRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 11)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected 11 fields, got " +
                              std::to_string(f.size()));
        OutcomeRow r;
        try {
            r.index = std::stoull(f[0]);
            r.true_label = std::stoi(f[1]);
            r.clean_pred = std::stoi(f[2]);
            r.adv_pred = std::stoi(f[3]);
            r.success = std::stoi(f[4]) != 0;
            r.l2_norm = std::stod(f[5]);
            r.linf_norm = std::stod(f[6]);
            if (!f[7].empty()) r.first_success_iteration = std::stoi(f[7]);
            r.loss = f[8];
            r.model = f[9];
            r.seed = std::stoull(f[10]);
        } catch (const std::exception&) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": malformed row");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failure on " + path);
}

nlohmann::ordered_json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

namespace {
constexpr char kAdvMagic[4] = {'A', 'D', 'V', 'X'};
}

void write_adv_examples(const std::vector<float>& data, std::size_t n, std::size_t dim,
                        const std::string& path) {
    if (data.size() != n * dim) throw ShapeError("adversarial example buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const std::uint32_t version = 1, un = static_cast<std::uint32_t>(n),
                        ud = static_cast<std::uint32_t>(dim);
    out.write(kAdvMagic, 4);
    out.write(reinterpret_cast<const char*>(&version), 4);
    out.write(reinterpret_cast<const char*>(&un), 4);
    out.write(reinterpret_cast<const char*>(&ud), 4);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * 4));
    if (!out) throw IoError("write failure on " + path);
}

std::vector<float> read_adv_examples(const std::string& path, std::size_t* n, std::size_t* dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    char magic[4];
    std::uint32_t version, un, ud;
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(&version), 4);
    in.read(reinterpret_cast<char*>(&un), 4);
    in.read(reinterpret_cast<char*>(&ud), 4);
    if (!in || std::memcmp(magic, kAdvMagic, 4) != 0)
        throw FormatError(path + ": not an adversarial-example file");
    if (version != 1) throw FormatError(path + ": unsupported version " + std::to_string(version));
    std::vector<float> data(static_cast<std::size_t>(un) * ud);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * 4));
    if (in.gcount() != static_cast<std::streamsize>(data.size() * 4))
        throw FormatError(path + ": truncated payload");
    *n = un;
    *dim = ud;
    return data;
}

} // namespace advkit
