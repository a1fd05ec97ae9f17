#pragma once

#include <string>
#include <vector>

#include "bat/objectives.hpp"

namespace bat {

struct SyntheticSpec {
    std::vector<double> ratio;  // e.g. {21.2, 1.9, 1}
    int vocab_size = 64;
    double overlap = 0.0;       // fraction of each signal pool shared with neighbours
    double mean_len = 12.0;
    int max_len = 24;
    int n_sequences = 200;
    double noise = 0.0;         // probability a token comes from the shared pool
    unsigned long long seed = 1;

    void validate(int model_max_seq_len = 1 << 30) const;
};

struct Sequence {
    std::vector<int> tokens;
    std::vector<int> labels;  // class id per token
};

struct Dataset {
    std::vector<Sequence> sequences;
    int n_classes = 0;

    long n_tokens() const;
    DatasetStats stats() const;  // per-class token counts
};

// Class-conditional token pools; token label = generating class, shared-pool
// tokens labeled with the majority class. Realized class frequencies follow
// the requested ratio by exact quota, and output is fully seed-determined.
Dataset generate_dataset(const SyntheticSpec& spec);

// 80/20-style split by sequence, stratified by each sequence's dominant class.
void split_dataset(const Dataset& full, double eval_fraction, unsigned long long seed,
                   Dataset& train, Dataset& eval);

void save_dataset_json(const Dataset& ds, const std::string& path);
Dataset load_dataset_json(const std::string& path);

}  // namespace bat
