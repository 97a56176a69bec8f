#include "groupce/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "groupce/error.hpp"

namespace groupce {

namespace {

constexpr char kMagic[8] = {'G', 'C', 'E', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void put_string(std::ostream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

uint32_t get_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

uint64_t get_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

double get_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

std::string get_string(std::istream& in) {
    const uint64_t n = get_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

void get_doubles(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void put_matrix(std::ostream& out, const DenseMatrix& m) {
    put_u64(out, static_cast<uint64_t>(m.rows));
    put_u64(out, static_cast<uint64_t>(m.cols));
    put_doubles(out, m.data);
}

DenseMatrix get_matrix(std::istream& in) {
    const int64_t rows = static_cast<int64_t>(get_u64(in));
    const int64_t cols = static_cast<int64_t>(get_u64(in));
    DenseMatrix m(rows, cols);
    get_doubles(in, m.data);
    return m;
}

void put_schema(std::ostream& out, const std::vector<FeatureSpec>& schema,
                const std::vector<std::vector<std::string>>& vocab) {
    put_u32(out, static_cast<uint32_t>(schema.size()));
    for (size_t f = 0; f < schema.size(); ++f) {
        put_string(out, schema[f].name);
        put_u64(out, static_cast<uint64_t>(schema[f].cardinality));
        put_u64(out, vocab[f].size());
        for (const auto& raw : vocab[f]) put_string(out, raw);
    }
}

void get_schema(std::istream& in, std::vector<FeatureSpec>& schema,
                std::vector<std::vector<std::string>>& vocab) {
    const uint32_t n = get_u32(in);
    schema.resize(n);
    vocab.resize(n);
    for (uint32_t f = 0; f < n; ++f) {
        schema[f].name = get_string(in);
        schema[f].cardinality = static_cast<int64_t>(get_u64(in));
        const uint64_t vs = get_u64(in);
        vocab[f].resize(vs);
        for (uint64_t i = 0; i < vs; ++i) vocab[f][i] = get_string(in);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    put_u32(out, kVersion);
    put_string(out, serialize_config(ck.config));
    put_schema(out, ck.user_schema, ck.user_vocab);
    put_schema(out, ck.item_schema, ck.item_vocab);

    put_u64(out, ck.train_impressions.size());
    for (const auto& [user, count] : ck.train_impressions) {
        put_string(out, user);
        put_u64(out, static_cast<uint64_t>(count));
    }

    put_u64(out, static_cast<uint64_t>(ck.params.step_count()));
    put_u32(out, static_cast<uint32_t>(ck.params.entries().size()));
    for (const auto& [name, p] : ck.params.entries()) {
        put_string(out, name);
        put_matrix(out, p.value);
        put_matrix(out, p.adam_m);
        put_matrix(out, p.adam_v);
    }

    out.put(ck.rvq.initialized ? 1 : 0);
    if (ck.rvq.initialized) {
        put_f64(out, ck.rvq.decay);
        put_f64(out, ck.rvq.expire_threshold);
        put_u32(out, static_cast<uint32_t>(ck.rvq.codebooks.size()));
        for (const auto& cb : ck.rvq.codebooks) {
            put_u32(out, static_cast<uint32_t>(cb.level));
            put_f64(out, cb.smoothing_eps);
            put_matrix(out, cb.vectors);
            put_u64(out, cb.ema_count.size());
            put_doubles(out, cb.ema_count);
        }
    }
    if (!out) throw IoError("short write while saving checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path);
    const uint32_t version = get_u32(in);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.config = parse_config_text(get_string(in), path + " (embedded config)");
    get_schema(in, ck.user_schema, ck.user_vocab);
    get_schema(in, ck.item_schema, ck.item_vocab);

    const uint64_t impressions = get_u64(in);
    for (uint64_t i = 0; i < impressions; ++i) {
        std::string user = get_string(in);
        const int64_t count = static_cast<int64_t>(get_u64(in));
        ck.train_impressions.emplace(std::move(user), count);
    }

    const int64_t step_count = static_cast<int64_t>(get_u64(in));
    const uint32_t tensors = get_u32(in);
    for (uint32_t i = 0; i < tensors; ++i) {
        const std::string name = get_string(in);
        DenseMatrix value = get_matrix(in);
        ck.params.create(name, value.rows, value.cols);
        Param& p = ck.params.at(name);
        p.value = std::move(value);
        p.adam_m = get_matrix(in);
        p.adam_v = get_matrix(in);
    }
    ck.params.set_step_count(step_count);

    ck.rvq.initialized = in.get() == 1;
    if (ck.rvq.initialized) {
        ck.rvq.decay = get_f64(in);
        ck.rvq.expire_threshold = get_f64(in);
        const uint32_t levels = get_u32(in);
        for (uint32_t l = 0; l < levels; ++l) {
            Codebook cb;
            cb.level = static_cast<int>(get_u32(in));
            cb.smoothing_eps = get_f64(in);
            cb.vectors = get_matrix(in);
            cb.ema_count.resize(get_u64(in));
            get_doubles(in, cb.ema_count);
            ck.rvq.codebooks.push_back(std::move(cb));
        }
    }
    if (!in) throw IoError("truncated checkpoint: " + path);
    return ck;
}

}  // namespace groupce
