#include "locenc/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "locenc/errors.hpp"

namespace locenc {

const char* task_name(Task t) { return t == Task::Classify ? "classify" : "regress"; }

Task task_from_name(const std::string& name) {
    if (name == "classify") return Task::Classify;
    if (name == "regress") return Task::Regress;
    throw DomainError("unknown task '" + name + "'");
}

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw ParseError("unknown split '" + name + "'");
}

std::vector<const DatasetRecord*> Dataset::split_view(Split s) const {
    std::vector<const DatasetRecord*> view;
    for (const auto& r : records) {
        if (r.split == s) view.push_back(&r);
    }
    return view;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string read_line_or_fail(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError(path + ": empty file, header expected");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

double parse_double_field(const std::string& s, const std::string& what, int line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
    return v;
}

long parse_int_field(const std::string& s, const std::string& what, int line_no) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
    }
    return v;
}

} // namespace

Dataset load_dataset_csv(const std::string& path, Task task) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open dataset file " + path);
    const std::string want_header =
        task == Task::Classify ? "id,lon,lat,split,label" : "id,lon,lat,split,target";
    const std::string header = read_line_or_fail(in, path);
    if (header != want_header) {
        throw SchemaError(path + ": header '" + header + "' does not match " +
                          task_name(task) + " schema '" + want_header + "'");
    }

    Dataset dataset;
    dataset.task = task;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != 5) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        }
        DatasetRecord rec;
        rec.id = fields[0];
        const double lon = parse_double_field(fields[1], "lon", line_no);
        const double lat = parse_double_field(fields[2], "lat", line_no);
        try {
            rec.loc = validate_location(lon, lat);
        } catch (const RangeError& e) {
            throw RangeError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const NonFiniteError& e) {
            throw NonFiniteError("line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            rec.split = split_from_name(fields[3]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (task == Task::Classify) {
            const long label = parse_int_field(fields[4], "label", line_no);
            if (label < 0) {
                throw ParseError("line " + std::to_string(line_no) + ": negative label");
            }
            rec.label = static_cast<int>(label);
            dataset.n_classes = std::max(dataset.n_classes, rec.label + 1);
        } else {
            rec.target = parse_double_field(fields[4], "target", line_no);
            if (!std::isfinite(rec.target)) {
                throw ParseError("line " + std::to_string(line_no) + ": non-finite target");
            }
        }
        dataset.records.push_back(std::move(rec));
    }
    return dataset;
}

void save_dataset_csv(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write dataset file " + path);
    out << (dataset.task == Task::Classify ? "id,lon,lat,split,label"
                                           : "id,lon,lat,split,target")
        << "\n";
    for (const auto& r : dataset.records) {
        out << r.id << ',' << format_double(r.loc.lon) << ',' << format_double(r.loc.lat) << ','
            << split_name(r.split) << ',';
        if (dataset.task == Task::Classify) {
            out << r.label;
        } else {
            out << format_double(r.target);
        }
        out << "\n";
    }
}

VectorTable load_vector_csv(const std::string& path, const std::string& prefix) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file " + path);
    const std::string header = read_line_or_fail(in, path);
    const auto cols = split_line(header);
    if (cols.size() < 2 || cols[0] != "id") {
        throw SchemaError(path + ": header must be id," + prefix + "_0,...");
    }
    for (std::size_t i = 1; i < cols.size(); ++i) {
        const std::string want = prefix + "_" + std::to_string(i - 1);
        if (cols[i] != want) {
            throw SchemaError(path + ": column " + std::to_string(i) + " is '" + cols[i] +
                              "', expected '" + want + "'");
        }
    }
    VectorTable table;
    table.dim = static_cast<int>(cols.size() - 1);
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != cols.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(cols.size()) + " fields");
        }
        Eigen::VectorXd v(table.dim);
        for (int i = 0; i < table.dim; ++i) {
            v[i] = parse_double_field(fields[static_cast<std::size_t>(i) + 1],
                                      prefix + "_" + std::to_string(i), line_no);
            if (!std::isfinite(v[i])) {
                throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
            }
        }
        table.by_id[fields[0]] = std::move(v);
    }
    return table;
}

Eigen::MatrixXd join_by_id(const VectorTable& table,
                           const std::vector<const DatasetRecord*>& records) {
    std::vector<std::string> missing;
    Eigen::MatrixXd out(table.dim, static_cast<Eigen::Index>(records.size()));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto it = table.by_id.find(records[i]->id);
        if (it == table.by_id.end()) {
            if (missing.size() < 10) missing.push_back(records[i]->id);
            continue;
        }
        out.col(static_cast<Eigen::Index>(i)) = it->second;
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "join failed; first missing ids:";
        for (const auto& id : missing) msg << ' ' << id;
        throw JoinError(msg.str());
    }
    return out;
}

void save_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictions file " + path);
    out << "id,lon,lat,hit1,rank,abs_err\n";
    for (const auto& r : rows) {
        out << r.id << ',' << format_double(r.loc.lon) << ',' << format_double(r.loc.lat) << ',';
        if (r.is_classification()) {
            out << r.hit1 << ',' << r.rank << ',';
        } else {
            out << ",," << format_double(r.abs_err);
        }
        out << "\n";
    }
}

std::vector<PredictionRow> load_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open predictions file " + path);
    const std::string header = read_line_or_fail(in, path);
    if (header != "id,lon,lat,hit1,rank,abs_err") {
        throw SchemaError(path + ": unexpected predictions header '" + header + "'");
    }
    std::vector<PredictionRow> rows;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_line(line);
        if (fields.size() != 6) {
            throw ParseError("line " + std::to_string(line_no) + ": expected 6 fields");
        }
        PredictionRow row;
        row.id = fields[0];
        const double lon = parse_double_field(fields[1], "lon", line_no);
        const double lat = parse_double_field(fields[2], "lat", line_no);
        try {
            row.loc = validate_location(lon, lat);
        } catch (const RangeError& e) {
            throw RangeError("line " + std::to_string(line_no) + ": " + e.what());
        }
        const bool has_cls = !fields[3].empty();
        const bool has_reg = !fields[5].empty();
        if (has_cls == has_reg) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": exactly one of hit1 and abs_err must be set");
        }
        if (has_cls) {
            row.hit1 = static_cast<int>(parse_int_field(fields[3], "hit1", line_no));
            row.rank = static_cast<int>(parse_int_field(fields[4], "rank", line_no));
            if ((row.hit1 != 0 && row.hit1 != 1) || row.rank < 1) {
                throw ParseError("line " + std::to_string(line_no) + ": bad hit1/rank");
            }
        } else {
            row.abs_err = parse_double_field(fields[5], "abs_err", line_no);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace locenc
