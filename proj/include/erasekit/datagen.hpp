#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rng.hpp"
#include "types.hpp"

namespace erasekit {

struct Provenance {
    std::string generator;
    nlohmann::json parameters = nlohmann::json::object();
    std::uint64_t seed = 0;

    nlohmann::json to_json() const
    {
        return {{"generator", generator}, {"parameters", parameters}, {"seed", seed}};
    }

    static Provenance from_json(const nlohmann::json& j)
    {
        Provenance p;
        p.generator = j.at("generator").get<std::string>();
        p.parameters = j.at("parameters");
        p.seed = j.at("seed").get<std::uint64_t>();
        return p;
    }

    bool operator==(const Provenance&) const = default;
};

struct Dataset {
    FeatureMatrix features;
    ConceptLabels labels = ConceptLabels::continuous({});
    std::optional<ConceptLabels> task;
    Provenance provenance;

    Index size() const { return features.rows(); }

    void validate() const
    {
        const auto n = static_cast<std::size_t>(features.rows());
        if (labels.size() != n) {
            throw InvalidArgument("dataset has " + std::to_string(n) + " feature rows but " +
                                  std::to_string(labels.size()) + " concept labels");
        }
        if (task && task->size() != n) {
            throw InvalidArgument("dataset has " + std::to_string(n) + " feature rows but " +
                                  std::to_string(task->size()) + " task labels");
        }
        if (provenance.generator.empty()) throw InvalidArgument("dataset provenance is not populated");
    }
};

/// a ~ U(0, 1), x ~ N(a 1_d, a I_d); the concept is a.
/// Instance i draws from its own counter-based stream, so any index range
/// can be generated independently.
inline Dataset gen_synthetic_continuous(Index n, Index d, std::uint64_t seed)
{
    require(n >= 2, "synthetic-continuous needs n >= 2");
    require(d >= 1, "synthetic-continuous needs d >= 1");
    Dataset ds;
    ds.features.resize(n, d);
    std::vector<double> latent(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        const double a = rng.uniform();
        const double sd = std::sqrt(a);
        for (Index j = 0; j < d; ++j) ds.features(i, j) = a + sd * rng.normal();
        latent[static_cast<std::size_t>(i)] = a;
    }
    ds.labels = ConceptLabels::continuous(std::move(latent));
    ds.provenance = {"synthetic-continuous", {{"n", n}, {"d", d}}, seed};
    return ds;
}

/// Two unit-covariance Gaussians at (0, 2) and (0, -2), n/2 points each.
/// Concept: the y coordinate. Task label: component id (0 for the upper one).
inline Dataset gen_two_gaussians(Index n, std::uint64_t seed)
{
    require(n >= 2, "two-gaussians needs n >= 2");
    if (n % 2 != 0) throw InvalidArgument("two-gaussians needs an even n, got " + std::to_string(n));
    Dataset ds;
    ds.features.resize(n, 2);
    std::vector<double> y(static_cast<std::size_t>(n));
    std::vector<std::int64_t> component(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        const bool upper = i < n / 2;
        ds.features(i, 0) = rng.normal();
        ds.features(i, 1) = (upper ? 2.0 : -2.0) + rng.normal();
        y[static_cast<std::size_t>(i)] = ds.features(i, 1);
        component[static_cast<std::size_t>(i)] = upper ? 0 : 1;
    }
    ds.labels = ConceptLabels::continuous(std::move(y));
    ds.task = ConceptLabels::categorical(std::move(component));
    ds.provenance = {"two-gaussians", {{"n", n}}, seed};
    return ds;
}

/// Binary labels sign(X W2 W1) with W2 (d x m) and W1 (m x 1) standard
/// normal. Positive maps to 1, negative to 0, and sign(0) to 1.
inline std::vector<std::int64_t> gen_label_from_random_net(const FeatureMatrix& x, Index m, std::uint64_t seed)
{
    require(m >= 1, "random label net needs m >= 1");
    Rng rng(seed);
    const Eigen::MatrixXd w2 = rng.normal_matrix(x.cols(), m);
    const Eigen::MatrixXd w1 = rng.normal_matrix(m, 1);
    const Eigen::VectorXd score = x * (w2 * w1);
    std::vector<std::int64_t> labels(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i) labels[static_cast<std::size_t>(i)] = score(i) >= 0.0 ? 1 : 0;
    return labels;
}

/// Features uniform on [lo, hi]^d; the concept is the random-net label
/// sign(X W2 W1) with hidden width m, drawn with the same seed.
inline Dataset gen_uniform(Index n, Index d, double lo, double hi, Index m, std::uint64_t seed)
{
    require(n >= 2 && d >= 1, "uniform generator needs n >= 2 and d >= 1");
    require(lo < hi, "uniform generator needs lo < hi");
    Dataset ds;
    ds.features.resize(n, d);
    for (Index i = 0; i < n; ++i) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
        for (Index j = 0; j < d; ++j) ds.features(i, j) = rng.uniform(lo, hi);
    }
    ds.labels = ConceptLabels::categorical(gen_label_from_random_net(ds.features, m, seed));
    ds.provenance = {"uniform", {{"n", n}, {"d", d}, {"lo", lo}, {"hi", hi}, {"m", m}}, seed};
    return ds;
}

// ---------------------------------------------------------------------------
// .krdm binary format (little-endian):
//   "KRDM" | u32 version | u64 n | u64 d | n*d f64 features, row-major
//   concept block: u8 tag (0 categorical, 1 continuous, 2 vector), payload
//     categorical: n i64 | continuous: n f64 | vector: u64 m, n*m f64
//   u8 has_task, then a label block as above when set
//   u64 length | provenance JSON (UTF-8)
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t krdm_version = 1;

namespace io {

class ByteWriter {
public:
    void raw(const void* data, std::size_t size)
    {
        const auto* p = static_cast<const char*>(data);
        bytes_.insert(bytes_.end(), p, p + size);
    }
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void string(const std::string& s)
    {
        u64(s.size());
        raw(s.data(), s.size());
    }

    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
};

class ByteReader {
public:
    ByteReader(std::string bytes, std::string source) : bytes_(std::move(bytes)), source_(std::move(source)) {}

    void expect(std::size_t count)
    {
        if (pos_ + count > bytes_.size()) {
            throw FormatError(source_ + ": truncated file, expected at least " + std::to_string(pos_ + count) +
                              " bytes, found " + std::to_string(bytes_.size()));
        }
    }
    std::string raw(std::size_t count)
    {
        expect(count);
        std::string out = bytes_.substr(pos_, count);
        pos_ += count;
        return out;
    }
    std::uint8_t u8()
    {
        expect(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32()
    {
        expect(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64()
    {
        expect(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string string()
    {
        const auto size = u64();
        return raw(static_cast<std::size_t>(size));
    }

    /// Checks that `count` elements of `width` bytes are available before
    /// allocating for them.
    void expect_elements(std::uint64_t count, std::size_t width)
    {
        if (count > (bytes_.size() - pos_) / width) expect(static_cast<std::size_t>(count) * width);
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t position() const { return pos_; }
    const std::string& source() const { return source_; }

private:
    std::string bytes_;
    std::string source_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

inline void write_labels(ByteWriter& w, const ConceptLabels& labels)
{
    switch (labels.kind()) {
    case ConceptLabels::Kind::categorical:
        w.u8(0);
        for (auto v : labels.classes()) w.i64(v);
        break;
    case ConceptLabels::Kind::continuous:
        w.u8(1);
        for (double v : labels.scalars()) w.f64(v);
        break;
    case ConceptLabels::Kind::vector: {
        w.u8(2);
        const auto& m = labels.vectors();
        w.u64(static_cast<std::uint64_t>(m.cols()));
        for (Index i = 0; i < m.rows(); ++i) {
            for (Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
        }
        break;
    }
    }
}

inline ConceptLabels read_labels(ByteReader& r, std::uint64_t n)
{
    const auto tag = r.u8();
    switch (tag) {
    case 0: {
        r.expect_elements(n, 8);
        std::vector<std::int64_t> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = r.i64();
        return ConceptLabels::categorical(std::move(v));
    }
    case 1: {
        r.expect_elements(n, 8);
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = r.f64();
        return ConceptLabels::continuous(std::move(v));
    }
    case 2: {
        const auto m = r.u64();
        if (m == 0) throw FormatError(r.source() + ": vector labels with zero columns");
        r.expect_elements(n * m, 8);
        Eigen::MatrixXd v(static_cast<Index>(n), static_cast<Index>(m));
        for (Index i = 0; i < v.rows(); ++i) {
            for (Index j = 0; j < v.cols(); ++j) v(i, j) = r.f64();
        }
        return ConceptLabels::vector(std::move(v));
    }
    default:
        throw FormatError(r.source() + ": unknown label tag " + std::to_string(tag) + " at byte " +
                          std::to_string(r.position() - 1));
    }
}

} // namespace io

inline std::string encode_krdm(const Dataset& ds)
{
    ds.validate();
    io::ByteWriter w;
    w.raw("KRDM", 4);
    w.u32(krdm_version);
    w.u64(static_cast<std::uint64_t>(ds.features.rows()));
    w.u64(static_cast<std::uint64_t>(ds.features.cols()));
    for (Index i = 0; i < ds.features.rows(); ++i) {
        for (Index j = 0; j < ds.features.cols(); ++j) w.f64(ds.features(i, j));
    }
    io::write_labels(w, ds.labels);
    w.u8(ds.task ? 1 : 0);
    if (ds.task) io::write_labels(w, *ds.task);
    w.string(ds.provenance.to_json().dump());
    return w.bytes();
}

inline Dataset decode_krdm(std::string bytes, const std::string& source = "<memory>")
{
    io::ByteReader r(std::move(bytes), source);
    if (r.raw(4) != "KRDM") throw FormatError(source + ": bad magic, not a .krdm file");
    const auto version = r.u32();
    if (version != krdm_version) {
        throw FormatError(source + ": unsupported .krdm version " + std::to_string(version));
    }
    const auto n = r.u64();
    const auto d = r.u64();
    if (d == 0 || n == 0) throw FormatError(source + ": empty feature matrix (n=" + std::to_string(n) + ", d=" + std::to_string(d) + ")");
    r.expect_elements(n * d, 8);
    Dataset ds;
    ds.features.resize(static_cast<Index>(n), static_cast<Index>(d));
    for (Index i = 0; i < ds.features.rows(); ++i) {
        for (Index j = 0; j < ds.features.cols(); ++j) ds.features(i, j) = r.f64();
    }
    ds.labels = io::read_labels(r, n);
    if (r.u8() != 0) ds.task = io::read_labels(r, n);
    const std::string prov = r.string();
    try {
        ds.provenance = Provenance::from_json(nlohmann::json::parse(prov));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": malformed provenance record: " + e.what());
    }
    if (!r.at_end()) throw FormatError(source + ": trailing bytes after provenance record");
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// CSV layout: optional first line "# provenance: {json}", then a header of
// feature columns f0..f{d-1} followed by concept columns, one of
//   concept              continuous
//   concept_class        categorical
//   concept_0..concept_{m-1}  vector
// and optionally `task` (continuous) or `task_class` (categorical).
// ---------------------------------------------------------------------------

namespace io {

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    for (auto& cell : cells) {
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    }
    return cells;
}

inline double parse_cell(std::string_view cell, std::size_t line, std::size_t column, const std::string& source)
{
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || cell.empty()) {
        throw FormatError(source + ": non-numeric cell '" + std::string(cell) + "' at line " + std::to_string(line) +
                          ", column " + std::to_string(column));
    }
    return v;
}

} // namespace io

inline std::string encode_csv(const Dataset& ds)
{
    ds.validate();
    std::string out = "# provenance: " + ds.provenance.to_json().dump() + "\n";
    const Index d = ds.features.cols();
    for (Index j = 0; j < d; ++j) out += (j ? ",f" : "f") + std::to_string(j);
    switch (ds.labels.kind()) {
    case ConceptLabels::Kind::categorical: out += ",concept_class"; break;
    case ConceptLabels::Kind::continuous: out += ",concept"; break;
    case ConceptLabels::Kind::vector:
        for (Index j = 0; j < ds.labels.vectors().cols(); ++j) out += ",concept_" + std::to_string(j);
        break;
    }
    if (ds.task) out += ds.task->kind() == ConceptLabels::Kind::categorical ? ",task_class" : ",task";
    out += "\n";
    auto append_labels = [&out](const ConceptLabels& labels, Index i) {
        const auto row = static_cast<std::size_t>(i);
        switch (labels.kind()) {
        case ConceptLabels::Kind::categorical: out += "," + std::to_string(labels.classes()[row]); break;
        case ConceptLabels::Kind::continuous: out += "," + io::format_double(labels.scalars()[row]); break;
        case ConceptLabels::Kind::vector:
            for (Index j = 0; j < labels.vectors().cols(); ++j) out += "," + io::format_double(labels.vectors()(i, j));
            break;
        }
    };
    for (Index i = 0; i < ds.features.rows(); ++i) {
        for (Index j = 0; j < d; ++j) {
            if (j) out += ",";
            out += io::format_double(ds.features(i, j));
        }
        append_labels(ds.labels, i);
        if (ds.task) {
            if (ds.task->kind() == ConceptLabels::Kind::vector) throw InvalidArgument("vector task labels are not supported in CSV");
            append_labels(*ds.task, i);
        }
        out += "\n";
    }
    return out;
}

inline Dataset decode_csv(const std::string& text, const std::string& source = "<memory>")
{
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    Dataset ds;
    ds.provenance = {"csv", {{"source", source}}, 0};

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line.rfind("# provenance:", 0) == 0) {
                try {
                    ds.provenance = Provenance::from_json(nlohmann::json::parse(line.substr(13)));
                } catch (const nlohmann::json::exception& e) {
                    throw FormatError(source + ": malformed provenance at line " + std::to_string(line_no) + ": " + e.what());
                }
                continue;
            }
            if (line[0] == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_line()) throw FormatError(source + ": missing header row");
    const auto header = io::split_csv_line(line);
    std::size_t d = 0;
    while (d < header.size() && header[d] == "f" + std::to_string(d)) ++d;
    if (d == 0) throw FormatError(source + ": malformed header, expected feature columns f0, f1, ...");

    enum class Col { concept_scalar, concept_class, concept_vec, task, task_class };
    std::vector<Col> roles;
    std::size_t concept_dims = 0;
    for (std::size_t c = d; c < header.size(); ++c) {
        const auto name = header[c];
        if (name == "concept") roles.push_back(Col::concept_scalar);
        else if (name == "concept_class") roles.push_back(Col::concept_class);
        else if (name == "concept_" + std::to_string(concept_dims)) {
            roles.push_back(Col::concept_vec);
            ++concept_dims;
        } else if (name == "task") roles.push_back(Col::task);
        else if (name == "task_class") roles.push_back(Col::task_class);
        else {
            throw FormatError(source + ": malformed header, unexpected column '" + std::string(name) + "' at column " +
                              std::to_string(c + 1));
        }
    }
    const auto count = [&](Col r) { return std::count(roles.begin(), roles.end(), r); };
    const auto scalar_concepts = count(Col::concept_scalar) + count(Col::concept_class);
    if ((scalar_concepts > 0) == (concept_dims > 0) || scalar_concepts > 1) {
        throw FormatError(source + ": header must contain exactly one concept column group");
    }
    if (count(Col::task) + count(Col::task_class) > 1) throw FormatError(source + ": more than one task column");

    std::vector<std::vector<double>> rows;
    while (next_line()) {
        const auto cells = io::split_csv_line(line);
        if (cells.size() != header.size()) {
            throw FormatError(source + ": dimension mismatch at line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
        }
        std::vector<double> values(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) values[c] = io::parse_cell(cells[c], line_no, c + 1, source);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw FormatError(source + ": no data rows");

    const auto n = static_cast<Index>(rows.size());
    ds.features.resize(n, static_cast<Index>(d));
    std::vector<double> concept_scalar, task_scalar;
    std::vector<std::int64_t> concept_class, task_class;
    Eigen::MatrixXd concept_vec(n, static_cast<Index>(concept_dims));
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < d; ++j) ds.features(i, static_cast<Index>(j)) = row[j];
        std::size_t vec_col = 0;
        for (std::size_t c = 0; c < roles.size(); ++c) {
            const double v = row[d + c];
            auto as_class = [&]() {
                if (v < 0 || v != std::floor(v)) {
                    throw FormatError(source + ": class id must be a non-negative integer at line " +
                                      std::to_string(static_cast<std::size_t>(i) + 2) + ", column " + std::to_string(d + c + 1));
                }
                return static_cast<std::int64_t>(v);
            };
            switch (roles[c]) {
            case Col::concept_scalar: concept_scalar.push_back(v); break;
            case Col::concept_class: concept_class.push_back(as_class()); break;
            case Col::concept_vec: concept_vec(i, static_cast<Index>(vec_col++)) = v; break;
            case Col::task: task_scalar.push_back(v); break;
            case Col::task_class: task_class.push_back(as_class()); break;
            }
        }
    }
    if (count(Col::concept_scalar)) ds.labels = ConceptLabels::continuous(std::move(concept_scalar));
    else if (count(Col::concept_class)) ds.labels = ConceptLabels::categorical(std::move(concept_class));
    else ds.labels = ConceptLabels::vector(std::move(concept_vec));
    if (count(Col::task)) ds.task = ConceptLabels::continuous(std::move(task_scalar));
    if (count(Col::task_class)) ds.task = ConceptLabels::categorical(std::move(task_class));
    ds.validate();
    return ds;
}

enum class FeatureFormat { krdm, csv };

inline FeatureFormat format_from_path(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".krdm") return FeatureFormat::krdm;
    if (ext == ".csv") return FeatureFormat::csv;
    throw ConfigError("cannot infer feature format from extension '" + ext + "' (use .krdm or .csv)");
}

inline Dataset load_features(const std::filesystem::path& path, std::optional<FeatureFormat> format = std::nullopt)
{
    const auto fmt = format.value_or(format_from_path(path));
    auto bytes = io::read_file(path);
    return fmt == FeatureFormat::krdm ? decode_krdm(std::move(bytes), path.string()) : decode_csv(bytes, path.string());
}

inline void save_features(const std::filesystem::path& path, const Dataset& ds,
                          std::optional<FeatureFormat> format = std::nullopt)
{
    const auto fmt = format.value_or(format_from_path(path));
    io::write_file(path, fmt == FeatureFormat::krdm ? encode_krdm(ds) : encode_csv(ds));
}

} // namespace erasekit
