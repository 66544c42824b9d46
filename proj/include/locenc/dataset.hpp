#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "locenc/geo.hpp"

namespace locenc {

enum class Task { Classify, Regress };
enum class Split { Train, Val, Test };

const char* task_name(Task t);
Task task_from_name(const std::string& name);
const char* split_name(Split s);
Split split_from_name(const std::string& name); // throws ParseError

/// One benchmark observation. Classification datasets carry label,
/// regression datasets carry target; never both.
struct DatasetRecord {
    std::string id;
    LocationDeg loc;
    Split split = Split::Train;
    int label = -1;
    double target = 0.0;
};

struct Dataset {
    Task task = Task::Classify;
    std::vector<DatasetRecord> records;
    int n_classes = 0; // classification: 1 + max label over all splits

    std::vector<const DatasetRecord*> split_view(Split s) const;
};

/// Strict CSV ingestion. Classification header is `id,lon,lat,split,label`,
/// regression `id,lon,lat,split,target`; anything else is a SchemaError.
/// Bad coordinates raise RangeError and malformed fields ParseError, both
/// naming the 1-based line.
Dataset load_dataset_csv(const std::string& path, Task task);

/// Inverse of load_dataset_csv; numbers are written shortest-roundtrip so a
/// load -> save -> load cycle reproduces records exactly.
void save_dataset_csv(const std::string& path, const Dataset& dataset);

/// Per-id dense vectors loaded from `id,<prefix>_0,...` CSVs (image
/// log-probabilities with prefix "logp", image embeddings with prefix "e").
struct VectorTable {
    int dim = 0;
    std::unordered_map<std::string, Eigen::VectorXd> by_id;
};

VectorTable load_vector_csv(const std::string& path, const std::string& prefix);

/// Columns in record order; every record id must be present, otherwise
/// JoinError listing the first 10 missing ids.
Eigen::MatrixXd join_by_id(const VectorTable& table,
                           const std::vector<const DatasetRecord*>& records);

/// One row of the predictions CSV (`id,lon,lat,hit1,rank,abs_err`).
/// Classification fills hit1/rank, regression fills abs_err; absent fields
/// are empty in the file and negative/NaN here.
struct PredictionRow {
    std::string id;
    LocationDeg loc;
    int hit1 = -1;
    int rank = -1;
    double abs_err = std::numeric_limits<double>::quiet_NaN();

    bool is_classification() const { return hit1 >= 0; }
};

void save_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> load_predictions_csv(const std::string& path);

/// Shortest lossless decimal form (std::to_chars), used by every CSV writer
/// so outputs are byte-stable and round-trip exactly.
std::string format_double(double v);

} // namespace locenc
