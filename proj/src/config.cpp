#include "pixelnet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pixelnet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "task",
        "seed",
        "data.dir",
        "out.dir",
        "backbone.stages",
        "backbone.kernel",
        "backbone.pool_after",
        "backbone.include_top",
        "backbone.top_channels",
        "hypercolumn.taps",
        "head.num_fc",
        "head.hidden_dim",
        "head.dropout",
        "head.output_dim",
        "train.epochs",
        "train.images_per_batch",
        "train.pixels_per_image",
        "train.strategy",
        "train.positive_fraction",
        "train.scale_jitter",
        "train.checkpoint_every",
        "optim.lr",
        "optim.momentum",
        "optim.weight_decay",
        "optim.schedule",
    };
    return keys;
}

int to_int(const std::string& key, const std::string& v) {
    try {
        return std::stoi(v);
    } catch (...) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (...) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

FlatConfig parse_flat_config(std::istream& is) {
    FlatConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " +
                              line);
        }
        cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

FlatConfig parse_flat_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    return parse_flat_config(f);
}

std::string canonical_text(const FlatConfig& cfg) {
    std::ostringstream os;
    for (const auto& [k, v] : cfg) os << k << "=" << v << "\n";
    return os.str();
}

void apply_override(FlatConfig& cfg, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override must be key=value, got '" + key_value + "'");
    }
    const std::string key = trim(key_value.substr(0, eq));
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    cfg[key] = trim(key_value.substr(eq + 1));
}

ModelConfig RunConfig::model_config(int dataset_classes) const {
    ModelConfig mc;
    for (const auto& [convs, channels] : stages) mc.backbone.stages.push_back({convs, channels, kernel});
    mc.backbone.pool_after = pool_after;
    mc.backbone.include_top = include_top;
    mc.backbone.top_channels = top_channels;
    mc.taps = taps;
    mc.head.num_fc = num_fc;
    mc.head.hidden_dim = hidden_dim;
    mc.head.dropout_rate = dropout;
    mc.head.task = task;
    mc.head.output_dim = resolved_output_dim(dataset_classes);
    return mc;
}

int RunConfig::resolved_output_dim(int dataset_classes) const {
    if (output_dim > 0) return output_dim;
    switch (task) {
        case Task::multiclass: return dataset_classes;
        case Task::binary_edge: return 1;
        case Task::normals: return 3;
    }
    return dataset_classes;
}

BatchPlan RunConfig::batch_plan() const {
    BatchPlan plan;
    plan.images_per_batch = images_per_batch;
    plan.pixels_per_image = pixels_per_image;
    plan.strategy = strategy;
    plan.positive_fraction = positive_fraction;
    plan.scale_jitter = scale_jitter;
    plan.seed = seed;
    return plan;
}

LrSchedule RunConfig::lr_schedule() const {
    LrSchedule s;
    if (!schedule.empty()) {
        s.points = schedule;
    } else {
        // default shape: two 10x drops at thirds of the run
        s.points.push_back({0, lr});
        if (epochs >= 3) {
            s.points.push_back({epochs / 3, lr / 10.0});
            s.points.push_back({2 * epochs / 3, lr / 100.0});
        }
    }
    return s;
}

RunConfig run_config_from_flat(const FlatConfig& flat) {
    RunConfig cfg;
    for (const auto& [key, value] : flat) {
        if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
        if (key == "task") {
            if (value == "segmentation") {
                cfg.task = Task::multiclass;
            } else if (value == "edges") {
                cfg.task = Task::binary_edge;
            } else if (value == "normals") {
                cfg.task = Task::normals;
            } else {
                throw ConfigError("unknown task '" + value + "' (segmentation|edges|normals)");
            }
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "data.dir") {
            cfg.data_dir = value;
        } else if (key == "out.dir") {
            cfg.out_dir = value;
        } else if (key == "backbone.stages") {
            cfg.stages.clear();
            for (const auto& part : split(value, ',')) {
                const auto x = part.find('x');
                if (x == std::string::npos) {
                    throw ConfigError("backbone.stages entries are CONVSxCHANNELS, got '" + part + "'");
                }
                cfg.stages.push_back({to_int(key, part.substr(0, x)), to_int(key, part.substr(x + 1))});
            }
        } else if (key == "backbone.kernel") {
            cfg.kernel = to_int(key, value);
        } else if (key == "backbone.pool_after") {
            cfg.pool_after.clear();
            for (const auto& part : split(value, ',')) cfg.pool_after.push_back(to_bool(key, part));
        } else if (key == "backbone.include_top") {
            cfg.include_top = to_bool(key, value);
        } else if (key == "backbone.top_channels") {
            cfg.top_channels = to_int(key, value);
        } else if (key == "hypercolumn.taps") {
            cfg.taps = split(value, ',');
        } else if (key == "head.num_fc") {
            cfg.num_fc = to_int(key, value);
        } else if (key == "head.hidden_dim") {
            cfg.hidden_dim = to_int(key, value);
        } else if (key == "head.dropout") {
            cfg.dropout = to_double(key, value);
        } else if (key == "head.output_dim") {
            cfg.output_dim = to_int(key, value);
        } else if (key == "train.epochs") {
            cfg.epochs = to_int(key, value);
        } else if (key == "train.images_per_batch") {
            cfg.images_per_batch = to_int(key, value);
        } else if (key == "train.pixels_per_image") {
            cfg.pixels_per_image = to_int(key, value);
        } else if (key == "train.strategy") {
            if (value == "uniform") {
                cfg.strategy = SamplingStrategy::uniform;
            } else if (value == "biased") {
                cfg.strategy = SamplingStrategy::biased;
            } else {
                throw ConfigError("unknown train.strategy '" + value + "' (uniform|biased)");
            }
        } else if (key == "train.positive_fraction") {
            cfg.positive_fraction = to_double(key, value);
        } else if (key == "train.scale_jitter") {
            cfg.scale_jitter.clear();
            for (const auto& part : split(value, ',')) cfg.scale_jitter.push_back(to_double(key, part));
        } else if (key == "train.checkpoint_every") {
            cfg.checkpoint_every = to_int(key, value);
        } else if (key == "optim.lr") {
            cfg.lr = to_double(key, value);
        } else if (key == "optim.momentum") {
            cfg.momentum = to_double(key, value);
        } else if (key == "optim.weight_decay") {
            cfg.weight_decay = to_double(key, value);
        } else if (key == "optim.schedule") {
            cfg.schedule.clear();
            if (!value.empty()) {
                for (const auto& part : split(value, ',')) {
                    const auto colon = part.find(':');
                    if (colon == std::string::npos) {
                        throw ConfigError("optim.schedule entries are EPOCH:LR, got '" + part + "'");
                    }
                    cfg.schedule.push_back({to_int(key, part.substr(0, colon)),
                                            to_double(key, part.substr(colon + 1))});
                }
            }
        }
    }
    return cfg;
}

FlatConfig flat_from_run_config(const RunConfig& cfg) {
    FlatConfig flat;
    flat["task"] = task_name(cfg.task);
    flat["seed"] = std::to_string(cfg.seed);
    flat["data.dir"] = cfg.data_dir;
    flat["out.dir"] = cfg.out_dir;
    {
        std::string s;
        for (const auto& [convs, channels] : cfg.stages) {
            s += (s.empty() ? "" : ",") + std::to_string(convs) + "x" + std::to_string(channels);
        }
        flat["backbone.stages"] = s;
    }
    flat["backbone.kernel"] = std::to_string(cfg.kernel);
    {
        std::string s;
        for (bool b : cfg.pool_after) s += (s.empty() ? "" : ",") + std::string(b ? "1" : "0");
        flat["backbone.pool_after"] = s;
    }
    flat["backbone.include_top"] = cfg.include_top ? "1" : "0";
    flat["backbone.top_channels"] = std::to_string(cfg.top_channels);
    {
        std::string s;
        for (const auto& t : cfg.taps) s += (s.empty() ? "" : ",") + t;
        flat["hypercolumn.taps"] = s;
    }
    flat["head.num_fc"] = std::to_string(cfg.num_fc);
    flat["head.hidden_dim"] = std::to_string(cfg.hidden_dim);
    flat["head.dropout"] = fmt(cfg.dropout);
    flat["head.output_dim"] = std::to_string(cfg.output_dim);
    flat["train.epochs"] = std::to_string(cfg.epochs);
    flat["train.images_per_batch"] = std::to_string(cfg.images_per_batch);
    flat["train.pixels_per_image"] = std::to_string(cfg.pixels_per_image);
    flat["train.strategy"] = cfg.strategy == SamplingStrategy::uniform ? "uniform" : "biased";
    flat["train.positive_fraction"] = fmt(cfg.positive_fraction);
    {
        std::string s;
        for (double v : cfg.scale_jitter) s += (s.empty() ? "" : ",") + fmt(v);
        flat["train.scale_jitter"] = s;
    }
    flat["train.checkpoint_every"] = std::to_string(cfg.checkpoint_every);
    flat["optim.lr"] = fmt(cfg.lr);
    flat["optim.momentum"] = fmt(cfg.momentum);
    flat["optim.weight_decay"] = fmt(cfg.weight_decay);
    {
        std::string s;
        for (const auto& [e, v] : cfg.schedule) {
            s += (s.empty() ? "" : ",") + std::to_string(e) + ":" + fmt(v);
        }
        flat["optim.schedule"] = s;
    }
    return flat;
}

RunConfig default_run_config(Task task) {
    RunConfig cfg;
    cfg.task = task;
    if (task == Task::binary_edge) {
        // edge recipe: biased sampling, half-scale jitter, drops at 15/20,
        // end at 25 epochs
        cfg.strategy = SamplingStrategy::biased;
        cfg.positive_fraction = 0.25;
        cfg.scale_jitter = {0.5, 1.0};
        cfg.epochs = 25;
        cfg.schedule = {{0, cfg.lr}, {15, cfg.lr / 10.0}, {20, cfg.lr / 100.0}};
    }
    return cfg;
}

}  // namespace pixelnet
