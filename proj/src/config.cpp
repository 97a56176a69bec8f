#include "groupce/config.hpp"

#include <fstream>
#include <sstream>

#include "groupce/error.hpp"

namespace groupce {

void RvqConfig::validate() const {
    if (codebook_size < 1 || codebook_size > 1024)
        throw ConfigError("rvq.codebook_size must be in [1, 1024]");
    if (levels < 1 || levels > 8) throw ConfigError("rvq.levels must be in [1, 8]");
    if (decay <= 0.0 || decay >= 1.0) throw ConfigError("rvq.decay must be in (0, 1)");
    if (expire_threshold < 0.0) throw ConfigError("rvq.expire_threshold must be >= 0");
    if (smoothing_eps < 0.0) throw ConfigError("rvq.smoothing_eps must be >= 0");
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
    if (eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("train.early_stop_patience must be >= 1");
}

void RunConfig::validate() const {
    gen.validate();
    split.validate();
    tower.validate();
    opt.validate();
    rvq.validate();
    train.validate();
    if (loss.lambda < 0.0) throw ConfigError("loss.lambda must be >= 0");
    if (loss.listce_eps <= 0.0) throw ConfigError("loss.listce_eps must be > 0");
    if (sweep_codebook_sizes.empty() || sweep_levels.empty())
        throw ConfigError("sweep grid must be nonempty");
    if (diag_max_negatives < 2) throw ConfigError("diag.max_negatives must be >= 2");
}

Objective objective_from_string(const std::string& s) {
    if (s == "logloss") return Objective::Logloss;
    if (s == "logloss+pairwise") return Objective::LoglossPairwise;
    if (s == "logloss+softmaxce") return Objective::LoglossSoftmaxCE;
    if (s == "logloss+listce") return Objective::LoglossListCE;
    if (s == "groupce") return Objective::GroupCE;
    throw ConfigError("unknown objective '" + s +
                      "' (expected logloss, logloss+pairwise, logloss+softmaxce, "
                      "logloss+listce, or groupce)");
}

const char* objective_to_string(Objective o) {
    switch (o) {
        case Objective::Logloss: return "logloss";
        case Objective::LoglossPairwise: return "logloss+pairwise";
        case Objective::LoglossSoftmaxCE: return "logloss+softmaxce";
        case Objective::LoglossListCE: return "logloss+listce";
        case Objective::GroupCE: return "groupce";
    }
    return "groupce";
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int64_t to_int(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const int64_t x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
    }
}

double to_real(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int64_t> to_int_list(const std::string& v, const std::string& key) {
    std::vector<int64_t> out;
    std::string cur;
    std::istringstream in(v);
    while (std::getline(in, cur, ',')) {
        const std::string t = trim(cur);
        if (!t.empty()) out.push_back(to_int(t, key));
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

}  // namespace

void apply_config_override(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "data.csv") cfg.data_csv = value;
    else if (key == "gen.users") cfg.gen.users = to_int(value, key);
    else if (key == "gen.items") cfg.gen.items = to_int(value, key);
    else if (key == "gen.clusters") cfg.gen.clusters = to_int(value, key);
    else if (key == "gen.archetypes") cfg.gen.archetypes = to_int(value, key);
    else if (key == "gen.impressions_per_user") cfg.gen.impressions_per_user = to_int(value, key);
    else if (key == "gen.noise") cfg.gen.noise = to_real(value, key);
    else if (key == "gen.popularity_skew") cfg.gen.popularity_skew = to_real(value, key);
    else if (key == "gen.liked_frac") cfg.gen.liked_frac = to_real(value, key);
    else if (key == "gen.item_quality_std") cfg.gen.item_quality_std = to_real(value, key);
    else if (key == "gen.cluster_affinity_std") cfg.gen.cluster_affinity_std = to_real(value, key);
    else if (key == "gen.seed") cfg.gen.seed = static_cast<uint64_t>(to_int(value, key));
    else if (key == "split.train_frac") cfg.split.train_frac = to_real(value, key);
    else if (key == "split.valid_frac") cfg.split.valid_frac = to_real(value, key);
    else if (key == "split.test_frac") cfg.split.test_frac = to_real(value, key);
    else if (key == "split.seed") cfg.split.seed = static_cast<uint64_t>(to_int(value, key));
    else if (key == "model.hidden_sizes") cfg.tower.hidden_sizes = to_int_list(value, key);
    else if (key == "model.embedding_dim") cfg.tower.embedding_dim = to_int(value, key);
    else if (key == "opt.learning_rate") cfg.opt.learning_rate = to_real(value, key);
    else if (key == "opt.beta1") cfg.opt.beta1 = to_real(value, key);
    else if (key == "opt.beta2") cfg.opt.beta2 = to_real(value, key);
    else if (key == "opt.eps") cfg.opt.eps_adam = to_real(value, key);
    else if (key == "opt.weight_decay") cfg.opt.weight_decay = to_real(value, key);
    else if (key == "rvq.codebook_size") cfg.rvq.codebook_size = to_int(value, key);
    else if (key == "rvq.levels") cfg.rvq.levels = to_int(value, key);
    else if (key == "rvq.decay") cfg.rvq.decay = to_real(value, key);
    else if (key == "rvq.expire_threshold") cfg.rvq.expire_threshold = to_real(value, key);
    else if (key == "rvq.smoothing_eps") cfg.rvq.smoothing_eps = to_real(value, key);
    else if (key == "loss.objective") cfg.loss.objective = objective_from_string(value);
    else if (key == "loss.lambda") cfg.loss.lambda = to_real(value, key);
    else if (key == "loss.listce_eps") cfg.loss.listce_eps = to_real(value, key);
    else if (key == "loss.disable_hierarchical") cfg.loss.disable_hierarchical = to_bool(value, key);
    else if (key == "train.batch_size") cfg.train.batch_size = to_int(value, key);
    else if (key == "train.max_steps") cfg.train.max_steps = to_int(value, key);
    else if (key == "train.eval_every") cfg.train.eval_every = to_int(value, key);
    else if (key == "train.early_stop_patience") cfg.train.early_stop_patience = to_int(value, key);
    else if (key == "train.seed") cfg.train.seed = static_cast<uint64_t>(to_int(value, key));
    else if (key == "train.group_dump_every") cfg.train.group_dump_every = to_int(value, key);
    else if (key == "sweep.codebook_sizes") cfg.sweep_codebook_sizes = to_int_list(value, key);
    else if (key == "sweep.levels") cfg.sweep_levels = to_int_list(value, key);
    else if (key == "diag.max_negatives") cfg.diag_max_negatives = to_int(value, key);
    else if (key == "diag.grid_step") cfg.diag_grid_step = to_real(value, key);
    else throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            apply_config_override(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

namespace {

std::string join_ints(const std::vector<int64_t>& xs) {
    std::ostringstream os;
    for (size_t i = 0; i < xs.size(); ++i) {
        if (i) os << ',';
        os << xs[i];
    }
    return os.str();
}

std::string fmt_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "data.csv = " << cfg.data_csv << '\n';
    os << "gen.users = " << cfg.gen.users << '\n';
    os << "gen.items = " << cfg.gen.items << '\n';
    os << "gen.clusters = " << cfg.gen.clusters << '\n';
    os << "gen.archetypes = " << cfg.gen.archetypes << '\n';
    os << "gen.impressions_per_user = " << cfg.gen.impressions_per_user << '\n';
    os << "gen.noise = " << fmt_real(cfg.gen.noise) << '\n';
    os << "gen.popularity_skew = " << fmt_real(cfg.gen.popularity_skew) << '\n';
    os << "gen.liked_frac = " << fmt_real(cfg.gen.liked_frac) << '\n';
    os << "gen.item_quality_std = " << fmt_real(cfg.gen.item_quality_std) << '\n';
    os << "gen.cluster_affinity_std = " << fmt_real(cfg.gen.cluster_affinity_std) << '\n';
    os << "gen.seed = " << cfg.gen.seed << '\n';
    os << "split.train_frac = " << fmt_real(cfg.split.train_frac) << '\n';
    os << "split.valid_frac = " << fmt_real(cfg.split.valid_frac) << '\n';
    os << "split.test_frac = " << fmt_real(cfg.split.test_frac) << '\n';
    os << "split.seed = " << cfg.split.seed << '\n';
    os << "model.hidden_sizes = " << join_ints(cfg.tower.hidden_sizes) << '\n';
    os << "model.embedding_dim = " << cfg.tower.embedding_dim << '\n';
    os << "opt.learning_rate = " << fmt_real(cfg.opt.learning_rate) << '\n';
    os << "opt.beta1 = " << fmt_real(cfg.opt.beta1) << '\n';
    os << "opt.beta2 = " << fmt_real(cfg.opt.beta2) << '\n';
    os << "opt.eps = " << fmt_real(cfg.opt.eps_adam) << '\n';
    os << "opt.weight_decay = " << fmt_real(cfg.opt.weight_decay) << '\n';
    os << "rvq.codebook_size = " << cfg.rvq.codebook_size << '\n';
    os << "rvq.levels = " << cfg.rvq.levels << '\n';
    os << "rvq.decay = " << fmt_real(cfg.rvq.decay) << '\n';
    os << "rvq.expire_threshold = " << fmt_real(cfg.rvq.expire_threshold) << '\n';
    os << "rvq.smoothing_eps = " << fmt_real(cfg.rvq.smoothing_eps) << '\n';
    os << "loss.objective = " << objective_to_string(cfg.loss.objective) << '\n';
    os << "loss.lambda = " << fmt_real(cfg.loss.lambda) << '\n';
    os << "loss.listce_eps = " << fmt_real(cfg.loss.listce_eps) << '\n';
    os << "loss.disable_hierarchical = " << (cfg.loss.disable_hierarchical ? "true" : "false")
       << '\n';
    os << "train.batch_size = " << cfg.train.batch_size << '\n';
    os << "train.max_steps = " << cfg.train.max_steps << '\n';
    os << "train.eval_every = " << cfg.train.eval_every << '\n';
    os << "train.early_stop_patience = " << cfg.train.early_stop_patience << '\n';
    os << "train.seed = " << cfg.train.seed << '\n';
    os << "train.group_dump_every = " << cfg.train.group_dump_every << '\n';
    os << "sweep.codebook_sizes = " << join_ints(cfg.sweep_codebook_sizes) << '\n';
    os << "sweep.levels = " << join_ints(cfg.sweep_levels) << '\n';
    os << "diag.max_negatives = " << cfg.diag_max_negatives << '\n';
    os << "diag.grid_step = " << fmt_real(cfg.diag_grid_step) << '\n';
    return os.str();
}

}  // namespace groupce
