#include "locenc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "locenc/errors.hpp"
#include "locenc/json_io.hpp"

namespace locenc {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

void read_bytes(std::istream& in, void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw ParseError("checkpoint truncated");
    }
}

template <typename T>
T read_pod(std::istream& in) {
    T v;
    read_bytes(in, &v, sizeof(T));
    return v;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    write_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Eigen::MatrixXd read_matrix(std::istream& in) {
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    if (rows > (1u << 24) || cols > (1u << 24)) throw ParseError("checkpoint: absurd matrix dims");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
    write_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

Eigen::VectorXd read_vector(std::istream& in) {
    const auto n = read_pod<std::uint64_t>(in);
    if (n > (1u << 28)) throw ParseError("checkpoint: absurd vector length");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    read_bytes(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
    return v;
}

void write_params(std::ostream& out, const nn::MlpParams& p) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.arch));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.activation));
    write_pod<std::int32_t>(out, p.in_dim);
    write_pod<std::int32_t>(out, p.k);
    write_pod<std::int32_t>(out, p.h);
    write_pod<std::int32_t>(out, p.d);
    if (p.arch == nn::Arch::Table) {
        write_pod<std::uint64_t>(out, p.vocab.size());
        write_bytes(out, p.vocab.data(), sizeof(std::int64_t) * p.vocab.size());
        write_matrix(out, p.embedding_table);
        return;
    }
    write_pod<std::uint64_t>(out, p.weights.size());
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        write_matrix(out, p.weights[i]);
        write_vector(out, p.biases[i]);
    }
}

nn::MlpParams read_params(std::istream& in) {
    nn::MlpParams p;
    p.arch = static_cast<nn::Arch>(read_pod<std::uint32_t>(in));
    p.activation = static_cast<nn::Activation>(read_pod<std::uint32_t>(in));
    p.in_dim = read_pod<std::int32_t>(in);
    p.k = read_pod<std::int32_t>(in);
    p.h = read_pod<std::int32_t>(in);
    p.d = read_pod<std::int32_t>(in);
    if (p.arch == nn::Arch::Table) {
        const auto n = read_pod<std::uint64_t>(in);
        if (n > (1u << 28)) throw ParseError("checkpoint: absurd vocab size");
        p.vocab.resize(n);
        read_bytes(in, p.vocab.data(), sizeof(std::int64_t) * n);
        p.embedding_table = read_matrix(in);
        return p;
    }
    const auto n_layers = read_pod<std::uint64_t>(in);
    if (n_layers > 64) throw ParseError("checkpoint: absurd layer count");
    for (std::uint64_t i = 0; i < n_layers; ++i) {
        p.weights.push_back(read_matrix(in));
        p.biases.push_back(read_vector(in));
    }
    return p;
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path);
    write_bytes(out, kMagic, 4);
    write_pod<std::uint32_t>(out, kVersion);
    write_pod<std::uint32_t>(out, ckpt.task == Task::Classify ? 0u : 1u);
    write_params(out, ckpt.loc);
    write_pod<std::uint8_t>(out, ckpt.proj.has_value() ? 1 : 0);
    if (ckpt.proj) write_params(out, *ckpt.proj);
    write_pod<std::uint8_t>(out, ckpt.head.has_value() ? 1 : 0);
    if (ckpt.head) write_params(out, *ckpt.head);
    if (!out) throw Error("write failed for checkpoint " + path);

    ordered_json meta;
    meta["format"] = "locenc-checkpoint-meta";
    meta["version"] = kVersion;
    meta["task"] = task_name(ckpt.task);
    meta["n_classes"] = ckpt.n_classes;
    meta["encoder"] = encoder_spec_to_json(ckpt.spec);
    meta["aux"] = encoder_aux_to_json(ckpt.aux);
    std::ofstream side(path + ".json");
    if (!side) throw Error("cannot write checkpoint sidecar " + path + ".json");
    side << meta.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint " + path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad checkpoint magic");
    if (read_pod<std::uint32_t>(in) != kVersion) throw ParseError("unsupported checkpoint version");
    Checkpoint ckpt;
    ckpt.task = read_pod<std::uint32_t>(in) == 0 ? Task::Classify : Task::Regress;
    ckpt.loc = read_params(in);
    if (read_pod<std::uint8_t>(in) != 0) ckpt.proj = read_params(in);
    if (read_pod<std::uint8_t>(in) != 0) ckpt.head = read_params(in);

    std::ifstream side(path + ".json");
    if (!side) throw ParseError("missing checkpoint sidecar " + path + ".json");
    nlohmann::json meta;
    try {
        side >> meta;
        ckpt.n_classes = meta.at("n_classes").get<int>();
        ckpt.spec = encoder_spec_from_json(meta.at("encoder"));
        ckpt.aux = encoder_aux_from_json(meta.at("aux"));
        if (meta.at("task").get<std::string>() != task_name(ckpt.task)) {
            throw ParseError("sidecar task disagrees with binary checkpoint");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint sidecar: ") + e.what());
    }
    return ckpt;
}

} // namespace locenc
