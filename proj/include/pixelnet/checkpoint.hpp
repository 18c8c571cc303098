#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "pixelnet/config.hpp"
#include "pixelnet/io.hpp"
#include "pixelnet/model.hpp"
#include "pixelnet/trainer.hpp"

namespace pixelnet {

// Checkpoint container: "PXC1", u32 header length, canonical config text
// (run config plus checkpoint.* bookkeeping), u32 tensor count, then named
// tensors in the PXT1 format. Optimizer velocities ride along as
// "opt.v.<param>".
template <typename T>
struct Checkpoint {
    RunConfig run;
    int classes = 0;
    int epoch = 0;
    PixelNetModel<T> model;
    std::optional<OptimizerState<T>> optimizer;
};

template <typename T>
void save_checkpoint(const std::string& path, const RunConfig& run, int classes, int epoch,
                     PixelNetModel<T>& model, const OptimizerState<T>* opt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint for write: " + path);
    FlatConfig flat = flat_from_run_config(run);
    flat["checkpoint.dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
    flat["checkpoint.classes"] = std::to_string(classes);
    flat["checkpoint.epoch"] = std::to_string(epoch);
    flat["checkpoint.step"] = std::to_string(opt ? opt->step : 0);
    const std::string header = canonical_text(flat);

    f.write("PXC1", 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(header.size());
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));

    auto refs = param_refs(model);
    const std::uint32_t count =
        static_cast<std::uint32_t>(refs.size() + (opt ? refs.size() : 0));
    f.write(reinterpret_cast<const char*>(&count), 4);
    auto put = [&f](const std::string& name, const Tensor<T>& t) {
        const std::uint16_t nlen = static_cast<std::uint16_t>(name.size());
        f.write(reinterpret_cast<const char*>(&nlen), 2);
        f.write(name.data(), nlen);
        write_pxt(f, t);
    };
    for (const auto& ref : refs) put(ref.name, *ref.tensor);
    if (opt) {
        for (const auto& ref : refs) put("opt.v." + ref.name, opt->velocity.at(ref.name));
    }
    if (!f) throw DataError("failed writing checkpoint " + path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "PXC1") throw DataError("bad checkpoint magic in " + path);
    std::uint32_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 4);
    std::string header(hlen, '\0');
    f.read(header.data(), hlen);
    if (!f) throw DataError("truncated checkpoint header in " + path);

    std::istringstream hs(header);
    FlatConfig flat = parse_flat_config(hs);
    Checkpoint<T> ck;
    const std::string dtype = flat.at("checkpoint.dtype");
    if (dtype != (std::is_same_v<T, float> ? "f32" : "f64")) {
        throw DataError("checkpoint dtype " + dtype + " does not match the requested load");
    }
    ck.classes = std::stoi(flat.at("checkpoint.classes"));
    ck.epoch = std::stoi(flat.at("checkpoint.epoch"));
    const int step = std::stoi(flat.at("checkpoint.step"));
    for (const char* k : {"checkpoint.dtype", "checkpoint.classes", "checkpoint.epoch",
                          "checkpoint.step"}) {
        flat.erase(k);
    }
    ck.run = run_config_from_flat(flat);
    ck.model = init_model<T>(ck.run.model_config(ck.classes), ck.run.seed);

    std::uint32_t count = 0;
    f.read(reinterpret_cast<char*>(&count), 4);
    auto refs = param_refs(ck.model);
    bool any_velocity = false;
    OptimizerState<T> opt = make_optimizer(ck.model, ck.run.lr_schedule(), ck.run.momentum,
                                           ck.run.weight_decay);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t nlen = 0;
        f.read(reinterpret_cast<char*>(&nlen), 2);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        Tensor<T> t = read_pxt<T>(f);
        bool matched = false;
        if (name.rfind("opt.v.", 0) == 0) {
            auto it = opt.velocity.find(name.substr(6));
            if (it != opt.velocity.end() && it->second.shape() == t.shape()) {
                it->second = std::move(t);
                any_velocity = true;
                matched = true;
            }
        } else {
            for (const auto& ref : refs) {
                if (ref.name == name) {
                    if (ref.tensor->shape() != t.shape()) {
                        throw DataError("checkpoint tensor " + name + " has shape " +
                                        t.shape_string() + ", expected " +
                                        ref.tensor->shape_string());
                    }
                    *ref.tensor = std::move(t);
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) throw DataError("checkpoint tensor '" + name + "' does not fit the config");
    }
    if (!f) throw DataError("truncated checkpoint " + path);
    if (any_velocity) {
        opt.step = step;
        opt.epoch = ck.epoch;
        ck.optimizer = std::move(opt);
    }
    return ck;
}

}  // namespace pixelnet
