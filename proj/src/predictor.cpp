#include "lmroute/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "lmroute/embedding.hpp"
#include "lmroute/errors.hpp"
#include "lmroute/rng.hpp"

namespace lmroute {

namespace {

// Logits are clamped so the sigmoid stays strictly inside (0, 1) in double
// precision: sigma(36) == 1 - 2.3e-16 < 1.
constexpr double kLogitClamp = 36.0;

double sigmoid(double z) {
    z = std::clamp(z, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-z));
}

void check_dims(const DualHeadModel& model, const std::vector<double>& q,
                const std::vector<double>& l) {
    if (static_cast<int>(q.size()) != model.dim() || static_cast<int>(l.size()) != model.dim())
        throw ArgumentError("embedding dimension mismatch: model expects " +
                            std::to_string(model.dim()) + ", got " + std::to_string(q.size()) +
                            " and " + std::to_string(l.size()));
}

std::vector<double> softmax(std::vector<double> logits) {
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
        z = std::exp(z - max_logit);
        sum += z;
    }
    for (double& z : logits) z /= sum;
    return logits;
}

}  // namespace

DualHeadModel DualHeadModel::zeros(int dim, int l_max, int n_buckets) {
    if (dim <= 0 || l_max <= 0 || n_buckets <= 0)
        throw ArgumentError("dim, l_max and n_buckets must all be positive");
    const int bs = (l_max + n_buckets - 1) / n_buckets;
    DualHeadModel m;
    m.w_cap.assign(static_cast<std::size_t>(dim), 0.0);
    m.b_cap = 0.0;
    m.w_len.assign(static_cast<std::size_t>(n_buckets),
                   std::vector<double>(static_cast<std::size_t>(dim), 0.0));
    m.b_len.assign(static_cast<std::size_t>(n_buckets), 0.0);
    m.bucket_size = bs;
    m.n_buckets = n_buckets;
    m.l_max = l_max;
    return m;
}

DualHeadModel DualHeadModel::zeros_with_bucket_size(int dim, int l_max, int bucket_size) {
    if (bucket_size <= 0) throw ArgumentError("bucket_size must be positive");
    const int k = (l_max + bucket_size - 1) / bucket_size;
    DualHeadModel m = zeros(dim, l_max, k);
    m.bucket_size = bucket_size;
    return m;
}

void DualHeadModel::validate() const {
    if (dim() <= 0) throw ArgumentError("model has no capability weights");
    if (bucket_size <= 0 || n_buckets <= 0 || l_max <= 0)
        throw ArgumentError("bucket configuration must be positive");
    if (static_cast<std::int64_t>(n_buckets) * bucket_size < l_max)
        throw ArgumentError("n_buckets * bucket_size must cover l_max");
    if (static_cast<int>(w_len.size()) != n_buckets ||
        static_cast<int>(b_len.size()) != n_buckets)
        throw ArgumentError("length head shape does not match n_buckets");
    for (const auto& row : w_len)
        if (row.size() != w_cap.size()) throw ArgumentError("length head row dimension mismatch");
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(b_cap) || !std::all_of(w_cap.begin(), w_cap.end(), finite) ||
        !std::all_of(b_len.begin(), b_len.end(), finite))
        throw ArgumentError("model parameters must be finite");
    for (const auto& row : w_len)
        if (!std::all_of(row.begin(), row.end(), finite))
            throw ArgumentError("model parameters must be finite");
}

int DualHeadModel::bucket_of(int tokens) const {
    if (tokens < 0) throw ArgumentError("token count must be non-negative");
    return std::min(tokens / bucket_size, n_buckets - 1);
}

int DualHeadModel::bucket_center_tokens(int bucket) const {
    const double center = (static_cast<double>(bucket) + 0.5) * bucket_size;
    return std::min(static_cast<int>(std::llround(center)), l_max);
}

void DualHeadModel::save(const std::string& path) const {
    nlohmann::ordered_json doc;
    doc["format"] = "lmroute-dual-head";
    doc["version"] = 1;
    doc["dim"] = dim();
    doc["l_max"] = l_max;
    doc["n_buckets"] = n_buckets;
    doc["bucket_size"] = bucket_size;
    doc["w_cap"] = w_cap;
    doc["b_cap"] = b_cap;
    doc["w_len"] = w_len;
    doc["b_len"] = b_len;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write model file: " + path);
    out << doc.dump(2) << "\n";
}

DualHeadModel DualHeadModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError("model file is not valid JSON: " + path);
    if (!doc.contains("format") || doc["format"] != "lmroute-dual-head")
        throw SchemaError("unrecognized model file format: " + path);
    DualHeadModel m;
    m.l_max = doc["l_max"].get<int>();
    m.n_buckets = doc["n_buckets"].get<int>();
    m.bucket_size = doc["bucket_size"].get<int>();
    m.w_cap = doc["w_cap"].get<std::vector<double>>();
    m.b_cap = doc["b_cap"].get<double>();
    m.w_len = doc["w_len"].get<std::vector<std::vector<double>>>();
    m.b_len = doc["b_len"].get<std::vector<double>>();
    m.validate();
    return m;
}

double predict_capability_trained(const DualHeadModel& model,
                                  const std::vector<double>& query_embedding,
                                  const std::vector<double>& model_embedding) {
    check_dims(model, query_embedding, model_embedding);
    double z = model.b_cap;
    for (std::size_t d = 0; d < model.w_cap.size(); ++d)
        z += model.w_cap[d] * (query_embedding[d] * model_embedding[d]);
    return sigmoid(z);
}

LengthPrediction predict_length_trained(const DualHeadModel& model,
                                        const std::vector<double>& query_embedding,
                                        const std::vector<double>& model_embedding) {
    check_dims(model, query_embedding, model_embedding);
    std::vector<double> logits(model.b_len);
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const auto& row = model.w_len[k];
        double z = 0.0;
        for (std::size_t d = 0; d < row.size(); ++d)
            z += row[d] * (query_embedding[d] + model_embedding[d]);
        logits[k] += z;
    }
    LengthPrediction pred;
    pred.bucket_probs = softmax(std::move(logits));
    pred.bucket = static_cast<int>(std::max_element(pred.bucket_probs.begin(),
                                                    pred.bucket_probs.end()) -
                                   pred.bucket_probs.begin());
    pred.predicted_tokens = model.bucket_center_tokens(pred.bucket);
    return pred;
}

RetrievalStore::RetrievalStore(std::vector<std::string> model_ids, int l_max)
    : model_ids_(std::move(model_ids)), l_max_(l_max) {
    if (model_ids_.empty()) throw ArgumentError("retrieval store needs at least one model");
    if (l_max_ <= 0) throw ArgumentError("l_max must be positive");
}

RetrievalStore RetrievalStore::from_dataset(const Dataset& ds) {
    std::vector<std::string> ids;
    for (const auto& m : ds.models) ids.push_back(m.id);
    RetrievalStore store(std::move(ids), ds.l_max);
    for (const auto& q : ds.queries) {
        Entry e;
        e.embedding = q.embedding;
        e.capability.reserve(ds.models.size());
        e.out_tokens.reserve(ds.models.size());
        for (const auto& m : ds.models) {
            e.capability.push_back(static_cast<double>(q.correctness.at(m.id)));
            e.out_tokens.push_back(q.out_tokens.at(m.id));
        }
        store.add(std::move(e));
    }
    return store;
}

void RetrievalStore::add(Entry entry) {
    if (entry.capability.size() != model_ids_.size() ||
        entry.out_tokens.size() != model_ids_.size())
        throw ArgumentError("retrieval entry does not cover the model set");
    l2_normalize(entry.embedding);
    entries_.push_back(std::move(entry));
}

int RetrievalStore::model_index(const std::string& id) const {
    for (std::size_t j = 0; j < model_ids_.size(); ++j)
        if (model_ids_[j] == id) return static_cast<int>(j);
    return -1;
}

std::vector<std::pair<std::size_t, double>> RetrievalStore::retrieve_topk(
    const std::vector<double>& query_embedding, int k) const {
    if (entries_.empty())
        throw RetrievalUnavailableError("retrieval store is empty");
    if (k <= 0) throw ArgumentError("k must be positive");

    std::vector<std::pair<std::size_t, double>> scored;
    scored.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i)
        scored.emplace_back(i, cosine_similarity(query_embedding, entries_[i].embedding));

    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    scored.resize(take);
    return scored;
}

namespace {

// Shared weighting rule for the two retrieval averages.
double weighted_average(const std::vector<std::pair<std::size_t, double>>& hits,
                        const std::vector<double>& values) {
    double weight_sum = 0.0, value_sum = 0.0;
    for (const auto& [idx, sim] : hits) {
        const double w = std::clamp(sim, 0.0, 1.0);
        weight_sum += w;
        value_sum += w * values[idx];
    }
    if (weight_sum == 0.0) {
        double mean = 0.0;
        for (const auto& [idx, _] : hits) mean += values[idx];
        return mean / static_cast<double>(hits.size());
    }
    return value_sum / weight_sum;
}

}  // namespace

double RetrievalStore::capability_retrieve(const std::vector<double>& query_embedding,
                                           int model_idx, int k) const {
    if (model_idx < 0 || model_idx >= static_cast<int>(model_ids_.size()))
        throw ArgumentError("model index out of range");
    const auto hits = retrieve_topk(query_embedding, k);
    std::vector<double> values(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i)
        values[i] = entries_[i].capability[static_cast<std::size_t>(model_idx)];
    return weighted_average(hits, values);
}

double RetrievalStore::capability_retrieve(const std::vector<double>& query_embedding,
                                           const std::string& model_id, int k) const {
    const int idx = model_index(model_id);
    if (idx < 0) throw ArgumentError("unknown model id: '" + model_id + "'");
    return capability_retrieve(query_embedding, idx, k);
}

int RetrievalStore::length_retrieve(const std::vector<double>& query_embedding, int model_idx,
                                    int k) const {
    if (model_idx < 0 || model_idx >= static_cast<int>(model_ids_.size()))
        throw ArgumentError("model index out of range");
    const auto hits = retrieve_topk(query_embedding, k);
    std::vector<double> values(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i)
        values[i] = static_cast<double>(entries_[i].out_tokens[static_cast<std::size_t>(model_idx)]);
    const double avg = weighted_average(hits, values);
    return std::min(static_cast<int>(std::llround(avg)), l_max_);
}

int RetrievalStore::length_retrieve(const std::vector<double>& query_embedding,
                                    const std::string& model_id, int k) const {
    const int idx = model_index(model_id);
    if (idx < 0) throw ArgumentError("unknown model id: '" + model_id + "'");
    return length_retrieve(query_embedding, idx, k);
}

void FusionConfig::validate() const {
    if (gamma < 0.0 || gamma > 1.0 || delta < 0.0 || delta > 1.0)
        throw ArgumentError("gamma and delta must lie in [0, 1]");
    if (k <= 0) throw ArgumentError("k must be positive");
}

Prediction fuse(double a_trained, int l_trained, double a_retrieved, int l_retrieved,
                const FusionConfig& config, const ModelSpec& model, int in_tokens) {
    Prediction p;
    p.a_trained = a_trained;
    p.a_retrieved = a_retrieved;
    p.l_trained = l_trained;
    p.l_retrieved = l_retrieved;
    p.a = config.gamma * a_trained + (1.0 - config.gamma) * a_retrieved;

    const Money cost_trained = token_cost(model, 0, l_trained);
    const Money cost_retrieved = token_cost(model, 0, l_retrieved);
    // Money magnitudes stay far below 2^53 picodollars, so the blend below is
    // exact at the delta = 0 and delta = 1 boundaries.
    const double blended = config.delta * static_cast<double>(cost_trained) +
                           (1.0 - config.delta) * static_cast<double>(cost_retrieved);
    p.cost = token_cost(model, in_tokens, 0) + static_cast<Money>(std::llround(blended));
    return p;
}

Prediction predict_pair(const DualHeadModel& model, const RetrievalStore* store,
                        const FusionConfig& config, const QueryRecord& query,
                        const ModelSpec& model_spec, int model_idx) {
    const double a_trained =
        predict_capability_trained(model, query.embedding, model_spec.embedding);
    const LengthPrediction len =
        predict_length_trained(model, query.embedding, model_spec.embedding);

    FusionConfig effective = config;
    double a_retrieved = a_trained;
    int l_retrieved = len.predicted_tokens;
    if (store != nullptr && !store->empty()) {
        a_retrieved = store->capability_retrieve(query.embedding, model_idx, config.k);
        l_retrieved = store->length_retrieve(query.embedding, model_idx, config.k);
    } else {
        // No usable history: trained-only, gamma and delta treated as 1.
        effective.gamma = 1.0;
        effective.delta = 1.0;
    }
    return fuse(a_trained, len.predicted_tokens, a_retrieved, l_retrieved, effective,
                model_spec, query.in_tokens);
}

PredictionTable predict_all(const DualHeadModel& model, const RetrievalStore* store,
                            const FusionConfig& config, const Dataset& ds) {
    config.validate();
    PredictionTable table;
    table.rows.reserve(ds.queries.size());
    for (const auto& q : ds.queries) {
        std::vector<Prediction> row;
        row.reserve(ds.models.size());
        for (std::size_t j = 0; j < ds.models.size(); ++j)
            row.push_back(predict_pair(model, store, config, q, ds.models[j],
                                       static_cast<int>(j)));
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

struct PairView {
    const QueryRecord* query;
    const ModelSpec* model;
    double a_obs;
    int bucket_obs;
};

std::vector<PairView> make_pair_views(const DualHeadModel& model, const Dataset& ds,
                                      const std::vector<std::pair<int, int>>& pairs) {
    std::vector<PairView> views;
    views.reserve(pairs.size());
    for (const auto& [qi, mi] : pairs) {
        const QueryRecord& q = ds.queries[static_cast<std::size_t>(qi)];
        const ModelSpec& m = ds.models[static_cast<std::size_t>(mi)];
        PairView v;
        v.query = &q;
        v.model = &m;
        v.a_obs = static_cast<double>(q.correctness.at(m.id));
        v.bucket_obs = model.bucket_of(q.out_tokens.at(m.id));
        views.push_back(v);
    }
    return views;
}

}  // namespace

LossBreakdown training_loss(const DualHeadModel& model, const Dataset& ds,
                            const std::vector<std::pair<int, int>>& pairs) {
    LossBreakdown out;
    if (pairs.empty()) return out;
    for (const PairView& v : make_pair_views(model, ds, pairs)) {
        const double p = predict_capability_trained(model, v.query->embedding, v.model->embedding);
        out.capability += (p - v.a_obs) * (p - v.a_obs);
        const LengthPrediction len =
            predict_length_trained(model, v.query->embedding, v.model->embedding);
        const double q_y = len.bucket_probs[static_cast<std::size_t>(v.bucket_obs)];
        out.length += -std::log(std::max(q_y, 1e-300));
    }
    const double n = static_cast<double>(pairs.size());
    out.capability /= n;
    out.length /= n;
    out.total = out.capability + out.length;
    return out;
}

DualHeadGradient training_gradient(const DualHeadModel& model, const Dataset& ds,
                                   const std::vector<std::pair<int, int>>& pairs) {
    const std::size_t dim = model.w_cap.size();
    DualHeadGradient g;
    g.w_cap.assign(dim, 0.0);
    g.w_len.assign(model.w_len.size(), std::vector<double>(dim, 0.0));
    g.b_len.assign(model.b_len.size(), 0.0);
    if (pairs.empty()) return g;

    for (const PairView& v : make_pair_views(model, ds, pairs)) {
        const std::vector<double>& qe = v.query->embedding;
        const std::vector<double>& me = v.model->embedding;

        // Capability head: d/dz of (sigma(z) - a)^2 = 2 (p - a) p (1 - p).
        const double p = predict_capability_trained(model, qe, me);
        const double dz = 2.0 * (p - v.a_obs) * p * (1.0 - p);
        for (std::size_t d = 0; d < dim; ++d) g.w_cap[d] += dz * (qe[d] * me[d]);
        g.b_cap += dz;

        // Length head: d/du of -log softmax(u)_y = softmax(u) - onehot(y).
        const LengthPrediction len = predict_length_trained(model, qe, me);
        for (std::size_t k = 0; k < model.w_len.size(); ++k) {
            double du = len.bucket_probs[k];
            if (static_cast<int>(k) == v.bucket_obs) du -= 1.0;
            for (std::size_t d = 0; d < dim; ++d) g.w_len[k][d] += du * (qe[d] + me[d]);
            g.b_len[k] += du;
        }
    }

    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    for (double& x : g.w_cap) x *= inv_n;
    g.b_cap *= inv_n;
    for (auto& row : g.w_len)
        for (double& x : row) x *= inv_n;
    for (double& x : g.b_len) x *= inv_n;
    return g;
}

TrainLog train(DualHeadModel& model, const Dataset& train_set, const TrainConfig& config) {
    model.validate();
    if (train_set.queries.empty()) throw ArgumentError("training set is empty");
    if (config.epochs < 0) throw ArgumentError("epochs must be non-negative");
    if (config.batch_size <= 0) throw ArgumentError("batch_size must be positive");

    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(train_set.queries.size() * train_set.models.size());
    for (std::size_t i = 0; i < train_set.queries.size(); ++i)
        for (std::size_t j = 0; j < train_set.models.size(); ++j)
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));

    TrainLog log;
    Rng rng(config.seed);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_seeded(pairs, rng);
        double cap_sum = 0.0, len_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(config.batch_size));
            const std::vector<std::pair<int, int>> batch(pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                                         pairs.begin() + static_cast<std::ptrdiff_t>(end));
            const LossBreakdown loss = training_loss(model, train_set, batch);
            cap_sum += loss.capability * static_cast<double>(batch.size());
            len_sum += loss.length * static_cast<double>(batch.size());
            seen += batch.size();

            const DualHeadGradient g = training_gradient(model, train_set, batch);
            for (std::size_t d = 0; d < model.w_cap.size(); ++d)
                model.w_cap[d] -= config.learning_rate * g.w_cap[d];
            model.b_cap -= config.learning_rate * g.b_cap;
            for (std::size_t k = 0; k < model.w_len.size(); ++k) {
                for (std::size_t d = 0; d < model.w_len[k].size(); ++d)
                    model.w_len[k][d] -= config.learning_rate * g.w_len[k][d];
                model.b_len[k] -= config.learning_rate * g.b_len[k];
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.capability_loss = cap_sum / static_cast<double>(seen);
        stats.length_loss = len_sum / static_cast<double>(seen);
        stats.total_loss = stats.capability_loss + stats.length_loss;
        if (!std::isfinite(stats.total_loss)) throw TrainingDivergedError(epoch);
        log.epochs.push_back(stats);
    }
    return log;
}

PredictorEvaluation evaluate_predictor(const DualHeadModel& model, const RetrievalStore* store,
                                       const FusionConfig& config, const Dataset& eval_set) {
    config.validate();
    PredictorEvaluation eval;
    std::size_t cap_hits = 0, exact_hits = 0, pm1_hits = 0;
    for (const auto& q : eval_set.queries) {
        for (std::size_t j = 0; j < eval_set.models.size(); ++j) {
            const ModelSpec& m = eval_set.models[j];
            const Prediction p =
                predict_pair(model, store, config, q, m, static_cast<int>(j));

            const int a_obs = q.correctness.at(m.id);
            if ((p.a >= 0.5 ? 1 : 0) == a_obs) ++cap_hits;

            const double fused_len =
                config.delta * p.l_trained + (1.0 - config.delta) * p.l_retrieved;
            const int bucket_pred = model.bucket_of(
                std::min(static_cast<int>(std::llround(fused_len)), model.l_max));
            const int bucket_obs = model.bucket_of(q.out_tokens.at(m.id));
            if (bucket_pred == bucket_obs) ++exact_hits;
            if (std::abs(bucket_pred - bucket_obs) <= 1) ++pm1_hits;
            ++eval.pairs;
        }
    }
    if (eval.pairs > 0) {
        const double n = static_cast<double>(eval.pairs);
        eval.capability_accuracy = static_cast<double>(cap_hits) / n;
        eval.bucket_exact_accuracy = static_cast<double>(exact_hits) / n;
        eval.bucket_within_one_accuracy = static_cast<double>(pm1_hits) / n;
    }
    return eval;
}

}  // namespace lmroute
