/* SPDX-License-Identifier: Apache-2.0 */
#include "pointmode/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pointmode::io {

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw std::runtime_error("MetricsWriter: cannot open '" + path + "'");
}

void MetricsWriter::write_step(std::uint64_t step, int epoch, const pretrain::StepStats& stats, double wall_ms) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "step:%llu epoch:%d loss_total:%.17g loss_cd:%.17g loss_giou:%.17g grad_norm:%.17g wall_ms:%.3f\n",
                  static_cast<unsigned long long>(step), epoch, stats.loss_total, stats.loss_cd, stats.loss_giou,
                  stats.grad_norm, wall_ms);
    out_ << buf;
    out_.flush();
}

double MetricsRecord::number(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::invalid_argument("MetricsRecord: no field '" + key + "'");
    return std::stod(it->second);
}

std::vector<MetricsRecord> read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_metrics: cannot open '" + path + "'");
    std::vector<MetricsRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        MetricsRecord rec;
        std::istringstream ss(line);
        std::string token;
        while (ss >> token) {
            const std::size_t colon = token.find(':');
            if (colon == std::string::npos) continue;
            rec.fields[token.substr(0, colon)] = token.substr(colon + 1);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace pointmode::io
