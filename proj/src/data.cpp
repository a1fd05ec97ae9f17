#include "bat/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace bat {

namespace {

// Fisher-Yates driven by the raw 64-bit stream; avoids distribution internals.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

int pick(const std::vector<int>& pool, std::mt19937_64& rng) {
    return pool[static_cast<std::size_t>(rng() % pool.size())];
}

}  // namespace

void SyntheticSpec::validate(int model_max_seq_len) const {
    if (ratio.size() < 2) throw config_error("SyntheticSpec: need at least 2 class ratios");
    for (double r : ratio)
        if (r <= 0.0) throw config_error("SyntheticSpec: ratios must be positive");
    if (overlap < 0.0 || overlap >= 1.0)
        throw config_error("SyntheticSpec: overlap must lie in [0,1)");
    if (noise < 0.0 || noise >= 1.0) throw config_error("SyntheticSpec: noise must lie in [0,1)");
    if (max_len < 1 || mean_len < 1.0) throw config_error("SyntheticSpec: bad length parameters");
    if (max_len > model_max_seq_len)
        throw config_error("SyntheticSpec: max_len exceeds the model's max_seq_len");
    if (n_sequences < 1) throw config_error("SyntheticSpec: n_sequences must be >= 1");
    const int C = static_cast<int>(ratio.size());
    if (vocab_size < 2 * C + 2)
        throw config_error("SyntheticSpec: vocab too small for " + std::to_string(C) +
                           " signal pools plus shared pool and padding");
}

long Dataset::n_tokens() const {
    long n = 0;
    for (const auto& s : sequences) n += static_cast<long>(s.tokens.size());
    return n;
}

DatasetStats Dataset::stats() const {
    std::vector<long> counts(static_cast<std::size_t>(n_classes), 0L);
    for (const auto& s : sequences)
        for (int l : s.labels) ++counts[static_cast<std::size_t>(l)];
    for (auto& c : counts) c = std::max(c, 1L);  // guard classes absent from a tiny split
    return DatasetStats::from_counts(std::move(counts));
}

Dataset generate_dataset(const SyntheticSpec& spec) {
    spec.validate();
    const int C = static_cast<int>(spec.ratio.size());
    std::mt19937_64 rng(spec.seed);

    // token id 0 is padding; then the shared pool; then C signal slices
    const int usable = spec.vocab_size - 1;
    const int shared_n = std::max(1, usable / 6);
    const int slice = (usable - shared_n) / C;
    if (slice < 1) throw config_error("SyntheticSpec: vocab too small for signal slices");
    std::vector<int> shared_pool;
    for (int t = 1; t <= shared_n; ++t) shared_pool.push_back(t);
    std::vector<std::vector<int>> class_pool(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        const int begin = 1 + shared_n + c * slice;
        for (int t = begin; t < begin + slice; ++t) class_pool[static_cast<std::size_t>(c)].push_back(t);
    }
    // overlap: each pool additionally borrows the head of the next class's slice
    const int borrow = static_cast<int>(std::lround(spec.overlap * slice));
    for (int c = 0; c < C && borrow > 0; ++c) {
        const auto& next = class_pool[static_cast<std::size_t>((c + 1) % C)];
        class_pool[static_cast<std::size_t>(c)].insert(class_pool[static_cast<std::size_t>(c)].end(),
                                                       next.begin(), next.begin() + borrow);
    }

    // sequence lengths
    std::vector<int> lens;
    long total = 0;
    for (int s = 0; s < spec.n_sequences; ++s) {
        const double raw = uniform(rng, 0.5, 1.5) * spec.mean_len;
        const int len = std::clamp(static_cast<int>(std::lround(raw)), 1, spec.max_len);
        lens.push_back(len);
        total += len;
    }

    // exact label quotas by largest remainder
    const double ratio_sum = std::accumulate(spec.ratio.begin(), spec.ratio.end(), 0.0);
    std::vector<long> quota(static_cast<std::size_t>(C));
    std::vector<std::pair<double, int>> rem;
    long assigned = 0;
    for (int c = 0; c < C; ++c) {
        const double exact = spec.ratio[static_cast<std::size_t>(c)] / ratio_sum *
                             static_cast<double>(total);
        quota[static_cast<std::size_t>(c)] = static_cast<long>(std::floor(exact));
        assigned += quota[static_cast<std::size_t>(c)];
        rem.emplace_back(exact - std::floor(exact), c);
    }
    std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (long k = 0; k < total - assigned; ++k)
        ++quota[static_cast<std::size_t>(rem[static_cast<std::size_t>(k) % rem.size()].second)];

    const int majority =
        static_cast<int>(std::max_element(spec.ratio.begin(), spec.ratio.end()) - spec.ratio.begin());
    // noise tokens come from the shared pool and are labeled with the majority
    // class, so they are carved out of the majority quota
    long n_noise = std::min(static_cast<long>(std::lround(spec.noise * static_cast<double>(total))),
                            quota[static_cast<std::size_t>(majority)]);

    std::vector<int> label_seq;
    label_seq.reserve(static_cast<std::size_t>(total));
    for (int c = 0; c < C; ++c)
        for (long k = 0; k < quota[static_cast<std::size_t>(c)]; ++k) label_seq.push_back(c);
    shuffle_vec(label_seq, rng);

    // mark which majority-labeled tokens are noise
    std::vector<std::size_t> maj_positions;
    for (std::size_t i = 0; i < label_seq.size(); ++i)
        if (label_seq[i] == majority) maj_positions.push_back(i);
    shuffle_vec(maj_positions, rng);
    std::vector<bool> is_noise(label_seq.size(), false);
    for (long k = 0; k < n_noise; ++k) is_noise[maj_positions[static_cast<std::size_t>(k)]] = true;

    Dataset ds;
    ds.n_classes = C;
    std::size_t pos = 0;
    for (int len : lens) {
        Sequence seq;
        for (int t = 0; t < len; ++t, ++pos) {
            const int label = label_seq[pos];
            const int tok = is_noise[pos] ? pick(shared_pool, rng)
                                          : pick(class_pool[static_cast<std::size_t>(label)], rng);
            seq.tokens.push_back(tok);
            seq.labels.push_back(label);
        }
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

void split_dataset(const Dataset& full, double eval_fraction, unsigned long long seed,
                   Dataset& train, Dataset& eval) {
    if (eval_fraction < 0.0 || eval_fraction >= 1.0)
        throw config_error("split_dataset: eval fraction must lie in [0,1)");
    train.sequences.clear();
    eval.sequences.clear();
    train.n_classes = eval.n_classes = full.n_classes;

    std::map<int, std::vector<std::size_t>> by_dominant;
    for (std::size_t i = 0; i < full.sequences.size(); ++i) {
        std::vector<int> cnt(static_cast<std::size_t>(full.n_classes), 0);
        for (int l : full.sequences[i].labels) ++cnt[static_cast<std::size_t>(l)];
        const int dom = static_cast<int>(std::max_element(cnt.begin(), cnt.end()) - cnt.begin());
        by_dominant[dom].push_back(i);
    }
    std::mt19937_64 rng(seed ^ 0x5117BA7ULL);
    for (auto& [dom, idx] : by_dominant) {
        shuffle_vec(idx, rng);
        const std::size_t n_eval =
            static_cast<std::size_t>(std::lround(eval_fraction * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k)
            (k < n_eval ? eval : train).sequences.push_back(full.sequences[idx[k]]);
    }
}

void save_dataset_json(const Dataset& ds, const std::string& path) {
    nlohmann::json j;
    j["n_classes"] = ds.n_classes;
    auto& seqs = j["sequences"] = nlohmann::json::array();
    for (const auto& s : ds.sequences)
        seqs.push_back({{"tokens", s.tokens}, {"labels", s.labels}});
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("save_dataset_json: cannot open " + path);
    os << j.dump() << '\n';
}

Dataset load_dataset_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_dataset_json: cannot open " + path);
    nlohmann::json j;
    is >> j;
    Dataset ds;
    ds.n_classes = j.at("n_classes").get<int>();
    for (const auto& s : j.at("sequences")) {
        Sequence seq;
        seq.tokens = s.at("tokens").get<std::vector<int>>();
        seq.labels = s.at("labels").get<std::vector<int>>();
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

}  // namespace bat
