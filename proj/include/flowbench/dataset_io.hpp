#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "flowbench/flowdata.hpp"

namespace flowbench {

// One JSON object per line. The record form is auto-detected per line:
//   flow:     {"id", "src", "dst", "proto", "packets": [[t, dir, size, payload], ...],
//              "sni"?, "label"?}
//   trace:    {"id", "packets": [[t, dir, size, payload], ...], "label"?}   (no endpoints)
//   snapshot: {"id", "origin_id", "direction", "window_start", "window_len",
//              "packets": [[t, size], ...], "label"?}
//   ppi:      {"id", "ppi_iat", "ppi_dir", "ppi_size", "label"?}
// Labels are {"service", "category"}. Flow/trace packet times are rebased so
// each record starts at 0 and are sorted ascending on load. Malformed lines
// raise MalformedInput carrying the 1-based line number.

nlohmann::json item_to_json(const DatasetItem& item);
DatasetItem item_from_json(const nlohmann::json& j, std::size_t line = 0);

Dataset read_dataset_jsonl(std::istream& in, const std::string& name);
Dataset read_dataset_jsonl(const std::string& path);

// Deterministic: sorted object keys, shortest round-trip numbers, one item
// per line in dataset order.
void write_dataset_jsonl(const Dataset& ds, std::ostream& out);
void write_dataset_jsonl(const Dataset& ds, const std::string& path);

}  // namespace flowbench
