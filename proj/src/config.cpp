#include "magnum/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "magnum/errors.hpp"
#include "magnum/rng.hpp"

namespace magnum {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

size_t parse_size(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (value.empty() || *end != '\0' || errno == ERANGE || value[0] == '-')
        throw ConfigError("config key " + key + ": expected a non-negative integer, got '" +
                          value + "'");
    return static_cast<size_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (value.empty() || *end != '\0' || errno == ERANGE)
        throw ConfigError("config key " + key + ": expected a number, got '" + value + "'");
    return v;
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "model.common_dim") common_dim = parse_size(key, value);
    else if (key == "model.tabular_dim") tabular_dim = parse_size(key, value);
    else if (key == "model.unstructured_dim") unstructured_dim = parse_size(key, value);
    else if (key == "model.prompt_len") prompt_len = parse_size(key, value);
    else if (key == "model.encoder_layers") encoder_layers = parse_size(key, value);
    else if (key == "model.encoder_heads") encoder_heads = parse_size(key, value);
    else if (key == "model.modalities") modalities = value;
    else if (key == "midlevel.k") knn_k = parse_size(key, value);
    else if (key == "midlevel.rounds") coarsen_rounds = parse_size(key, value);
    else if (key == "midlevel.heads") attn_heads = parse_size(key, value);
    else if (key == "optim.lr") lr = parse_double(key, value);
    else if (key == "optim.weight_decay") weight_decay = parse_double(key, value);
    else if (key == "optim.beta1") beta1 = parse_double(key, value);
    else if (key == "optim.beta2") beta2 = parse_double(key, value);
    else if (key == "optim.eps") adam_eps = parse_double(key, value);
    else if (key == "optim.batch_size") batch_size = parse_size(key, value);
    else if (key == "optim.epochs") epochs = parse_size(key, value);
    else if (key == "optim.warmup_fraction") warmup_fraction = parse_double(key, value);
    else if (key == "seed") seed = parse_size(key, value);
    else throw ConfigError("unknown config key: " + key);

    if (key == "optim.warmup_fraction" && (warmup_fraction < 0.0 || warmup_fraction >= 1.0))
        throw ConfigError("optim.warmup_fraction must lie in [0, 1)");
    if (key == "optim.lr" && lr <= 0.0) throw ConfigError("optim.lr must be positive");
    if (key == "optim.batch_size" && batch_size == 0)
        throw ConfigError("optim.batch_size must be positive");
}

std::string RunConfig::to_text() const {
    std::ostringstream out;
    out << "midlevel.heads=" << attn_heads << "\n";
    out << "midlevel.k=" << knn_k << "\n";
    out << "midlevel.rounds=" << coarsen_rounds << "\n";
    out << "model.common_dim=" << common_dim << "\n";
    out << "model.encoder_heads=" << encoder_heads << "\n";
    out << "model.encoder_layers=" << encoder_layers << "\n";
    out << "model.modalities=" << modalities << "\n";
    out << "model.prompt_len=" << prompt_len << "\n";
    out << "model.tabular_dim=" << tabular_dim << "\n";
    out << "model.unstructured_dim=" << unstructured_dim << "\n";
    out << "optim.batch_size=" << batch_size << "\n";
    out << "optim.beta1=" << fmt_double(beta1) << "\n";
    out << "optim.beta2=" << fmt_double(beta2) << "\n";
    out << "optim.eps=" << fmt_double(adam_eps) << "\n";
    out << "optim.epochs=" << epochs << "\n";
    out << "optim.lr=" << fmt_double(lr) << "\n";
    out << "optim.warmup_fraction=" << fmt_double(warmup_fraction) << "\n";
    out << "optim.weight_decay=" << fmt_double(weight_decay) << "\n";
    out << "seed=" << seed << "\n";
    return out.str();
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_text()); }

std::vector<std::string> RunConfig::modality_filter() const {
    std::vector<std::string> names;
    if (modalities == "all") return names;
    std::stringstream ss(modalities);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) names.push_back(part);
    }
    if (names.empty()) throw ConfigError("model.modalities names no modality");
    return names;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash_at = line.find('#');
        if (hash_at != std::string::npos) line.erase(hash_at);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

}  // namespace magnum
