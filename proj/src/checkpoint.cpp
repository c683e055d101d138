/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/checkpoint.hpp"

#include <cstring>
#include <stdexcept>

#include "pointmode/storage.hpp"

namespace pointmode::io {

namespace {

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& out, std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); }

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

void put_tensor(std::string& out, const std::string& name, const TensorRecord& t, std::uint8_t dtype) {
    put_string(out, name);
    out.push_back(static_cast<char>(dtype));
    out.push_back(static_cast<char>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    if (dtype == 0) {
        out.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * 8);
    } else {
        for (double v : t.values) {
            const float f = static_cast<float>(v);
            out.append(reinterpret_cast<const char*>(&f), 4);
        }
    }
}

class Reader {
public:
    Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

    std::uint32_t u32() {
        std::uint32_t v;
        take(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        take(&v, 8);
        return v;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        take(&v, 1);
        return v;
    }
    std::string str() {
        const std::uint32_t n = u32();
        check(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    TensorRecord tensor(std::uint8_t dtype, const std::string& name) {
        TensorRecord t;
        const int ndim = u8();
        std::size_t count = 1;
        for (int i = 0; i < ndim; ++i) {
            t.shape.push_back(static_cast<int>(u32()));
            count *= static_cast<std::size_t>(t.shape.back());
        }
        t.values.resize(count);
        if (dtype == 0) {
            check(count * 8);
            std::memcpy(t.values.data(), bytes_.data() + pos_, count * 8);
            pos_ += count * 8;
        } else {
            check(count * 4);
            for (std::size_t i = 0; i < count; ++i) {
                float f;
                std::memcpy(&f, bytes_.data() + pos_ + i * 4, 4);
                t.values[i] = static_cast<double>(f);
            }
            pos_ += count * 4;
        }
        (void)name;
        return t;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void take(void* dst, std::size_t n) {
        check(n);
        std::memcpy(dst, bytes_.data() + pos_, n);
        pos_ += n;
    }
    void check(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("checkpoint: '" + path_ + "' is truncated");
    }
    const std::string& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

std::map<std::string, std::vector<double>> Checkpoint::param_values() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, rec] : params) out[name] = rec.values;
    return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out;
    out += "PMCK";
    put_u32(out, Checkpoint::kVersion);
    out.push_back(static_cast<char>(ckpt.dtype));
    put_u64(out, ckpt.global_step);
    put_u64(out, ckpt.run_seed);
    put_string(out, ckpt.config_json);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& [name, rec] : ckpt.params) put_tensor(out, name, rec, ckpt.dtype);
    put_u32(out, static_cast<std::uint32_t>(ckpt.opt_slots.size()));
    for (const auto& [name, rec] : ckpt.opt_slots) put_tensor(out, name, rec, ckpt.dtype);
    put_u64(out, ckpt.opt_steps);
    write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 8 || bytes.compare(0, 4, "PMCK") != 0)
        throw std::runtime_error("checkpoint: '" + path + "' is not a checkpoint file");
    Reader r(bytes, path);
    std::uint32_t magic;
    std::memcpy(&magic, bytes.data(), 4);
    r.u32();  // skip magic
    const std::uint32_t version = r.u32();
    if (version != Checkpoint::kVersion)
        throw std::runtime_error("checkpoint: '" + path + "' has format version " + std::to_string(version) +
                                 ", this build reads version " + std::to_string(Checkpoint::kVersion));
    Checkpoint ckpt;
    ckpt.dtype = r.u8();
    if (ckpt.dtype > 1) throw std::runtime_error("checkpoint: unknown dtype tag");
    ckpt.global_step = r.u64();
    ckpt.run_seed = r.u64();
    ckpt.config_json = r.str();
    const std::uint32_t n_params = r.u32();
    for (std::uint32_t i = 0; i < n_params; ++i) {
        const std::string name = r.str();
        const std::uint8_t dtype = r.u8();
        if (dtype != ckpt.dtype) throw std::runtime_error("checkpoint: mixed dtypes in '" + path + "'");
        ckpt.params.emplace_back(name, r.tensor(dtype, name));
    }
    const std::uint32_t n_slots = r.u32();
    for (std::uint32_t i = 0; i < n_slots; ++i) {
        const std::string name = r.str();
        const std::uint8_t dtype = r.u8();
        if (dtype != ckpt.dtype) throw std::runtime_error("checkpoint: mixed dtypes in '" + path + "'");
        ckpt.opt_slots.emplace_back(name, r.tensor(dtype, name));
    }
    ckpt.opt_steps = r.u64();
    if (!r.done()) throw std::runtime_error("checkpoint: trailing bytes in '" + path + "'");
    return ckpt;
}

Checkpoint snapshot(const model::ModeModel& model, const optim::AdamW* opt, const std::string& config_json,
                    std::uint64_t global_step, std::uint64_t run_seed, std::uint8_t dtype) {
    Checkpoint ckpt;
    ckpt.dtype = dtype;
    ckpt.global_step = global_step;
    ckpt.run_seed = run_seed;
    ckpt.config_json = config_json;
    for (const model::NamedParam& p : model.parameters()) {
        TensorRecord rec;
        rec.shape = p.tensor.shape();
        rec.values = p.tensor.values();
        ckpt.params.emplace_back(p.name, std::move(rec));
    }
    if (opt) {
        const auto& params = model.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
            TensorRecord m{params[i].tensor.shape(), opt->first_moments()[i]};
            TensorRecord v{params[i].tensor.shape(), opt->second_moments()[i]};
            ckpt.opt_slots.emplace_back("m." + params[i].name, std::move(m));
            ckpt.opt_slots.emplace_back("v." + params[i].name, std::move(v));
        }
        ckpt.opt_steps = opt->step_count();
    }
    return ckpt;
}

void restore_model(model::ModeModel& model, const Checkpoint& ckpt) {
    model.load_parameter_values(ckpt.param_values());
}

void restore_optimizer(optim::AdamW& opt, const model::ModeModel& model, const Checkpoint& ckpt) {
    if (ckpt.opt_slots.empty()) throw std::runtime_error("checkpoint: no optimizer state stored");
    std::map<std::string, const TensorRecord*> by_name;
    for (const auto& [name, rec] : ckpt.opt_slots) by_name[name] = &rec;
    std::vector<std::vector<double>> m, v;
    for (const model::NamedParam& p : model.parameters()) {
        auto mi = by_name.find("m." + p.name);
        auto vi = by_name.find("v." + p.name);
        if (mi == by_name.end() || vi == by_name.end())
            throw std::runtime_error("checkpoint: missing optimizer slots for '" + p.name + "'");
        m.push_back(mi->second->values);
        v.push_back(vi->second->values);
    }
    opt.restore(std::move(m), std::move(v), ckpt.opt_steps);
}

}  // namespace pointmode::io
