/* SPDX-License-Identifier: Apache-2.0 */
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pointmode/pretrain.hpp"

namespace pointmode::io {

// Append-only line-delimited metrics: one "key:value key:value ..." record
// per step, so partially written runs stay parseable.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path, bool append);

    void write_step(std::uint64_t step, int epoch, const pretrain::StepStats& stats, double wall_ms);

private:
    std::ofstream out_;
};

struct MetricsRecord {
    std::map<std::string, std::string> fields;
    double number(const std::string& key) const;
};

std::vector<MetricsRecord> read_metrics(const std::string& path);

}  // namespace pointmode::io
