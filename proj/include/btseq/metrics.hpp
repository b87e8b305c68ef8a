#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btseq/errors.hpp"
#include "btseq/model.hpp"
#include "btseq/tokens.hpp"

namespace btseq {

// Empirical n-gram counts pooled over a set of responses.
struct NGramTable {
    int n = 1;
    std::map<TokenSeq, long> counts;
    long total = 0;

    static NGramTable build(const std::vector<TokenSeq>& responses, int n) {
        if (n < 1) throw InputError("ngram: n must be >= 1");
        NGramTable t;
        t.n = n;
        for (const TokenSeq& r : responses) {
            if (static_cast<int>(r.size()) < n) continue;
            for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= r.size(); ++i) {
                TokenSeq g(r.begin() + static_cast<std::ptrdiff_t>(i),
                           r.begin() + static_cast<std::ptrdiff_t>(i) + n);
                t.counts[g] += 1;
                t.total += 1;
            }
        }
        return t;
    }
};

// Distinct n-grams over total n-grams, pooled across the corpus.
inline double dist_n(const std::vector<TokenSeq>& responses, int n) {
    NGramTable t = NGramTable::build(responses, n);
    if (t.total == 0) throw UndefinedMetricError("dist_n: no n-grams of order " + std::to_string(n));
    return static_cast<double>(t.counts.size()) / static_cast<double>(t.total);
}

// Shannon entropy (nats) of the empirical n-gram distribution.
inline double ent_n(const std::vector<TokenSeq>& responses, int n = 4) {
    NGramTable t = NGramTable::build(responses, n);
    if (t.total == 0) throw UndefinedMetricError("ent_n: no n-grams of order " + std::to_string(n));
    double ent = 0.0;
    for (const auto& [g, c] : t.counts) {
        const double p = static_cast<double>(c) / static_cast<double>(t.total);
        ent -= p * std::log(p);
    }
    return ent;
}

// Corpus-level BLEU-2: geometric mean of modified 1- and 2-gram
// precisions with the standard brevity penalty, one reference per
// hypothesis, no smoothing. Zero overlap at either order gives 0.
inline double bleu2(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
    if (hyps.empty() || hyps.size() != refs.size())
        throw InputError("bleu2: need equally many hypotheses and references");
    long match[2] = {0, 0}, total[2] = {0, 0};
    long hyp_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        hyp_len += static_cast<long>(hyps[i].size());
        ref_len += static_cast<long>(refs[i].size());
        for (int n = 1; n <= 2; ++n) {
            std::map<TokenSeq, long> hyp_counts, ref_counts;
            for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= hyps[i].size(); ++s)
                hyp_counts[TokenSeq(hyps[i].begin() + static_cast<std::ptrdiff_t>(s),
                                    hyps[i].begin() + static_cast<std::ptrdiff_t>(s) + n)] += 1;
            for (std::size_t s = 0; s + static_cast<std::size_t>(n) <= refs[i].size(); ++s)
                ref_counts[TokenSeq(refs[i].begin() + static_cast<std::ptrdiff_t>(s),
                                    refs[i].begin() + static_cast<std::ptrdiff_t>(s) + n)] += 1;
            for (const auto& [g, c] : hyp_counts) {
                total[n - 1] += c;
                auto it = ref_counts.find(g);
                if (it != ref_counts.end()) match[n - 1] += std::min(c, it->second);
            }
        }
    }
    if (total[0] == 0 || total[1] == 0) return 0.0;
    if (match[0] == 0 || match[1] == 0) return 0.0;
    const double p1 = static_cast<double>(match[0]) / static_cast<double>(total[0]);
    const double p2 = static_cast<double>(match[1]) / static_cast<double>(total[1]);
    const double bp = hyp_len >= ref_len
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
    return bp * std::exp(0.5 * (std::log(p1) + std::log(p2)));
}

// Fraction of generations the discriminator accepts as genuine
// (probability strictly above 0.5).
inline double adver_score(Discriminator& disc, const std::vector<TokenSeq>& contexts,
                          const std::vector<TokenSeq>& generations) {
    if (contexts.empty() || contexts.size() != generations.size())
        throw InputError("adver_score: need equally many contexts and generations");
    long fooled = 0;
    for (std::size_t i = 0; i < contexts.size(); ++i)
        if (discriminator_score(disc, contexts[i], generations[i]) > 0.5) ++fooled;
    return static_cast<double>(fooled) / static_cast<double>(contexts.size());
}

// exp of the token-weighted mean NLL over (source, target) pairs.
inline double perplexity(Seq2SeqPair& model, Direction dir, const std::vector<PairedExample>& pairs,
                         int batch_size = 16) {
    if (pairs.empty()) throw InputError("perplexity: empty pair set");
    double total = 0.0, tokens = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<TokenSeq> srcs, tgts;
        for (std::size_t i = start; i < end; ++i) {
            srcs.push_back(pairs[i].source);
            tgts.push_back(pairs[i].target);
        }
        Tape tape;
        BatchNll nll = batch_nll(tape, model, dir, srcs, tgts);
        total += tape.scalar_value(nll.total);
        tokens += nll.token_count;
    }
    return std::exp(total / tokens);
}

// ---- report ------------------------------------------------------------

struct MetricsReport {
    std::optional<double> bleu2;
    std::optional<double> dist1;
    std::optional<double> dist2;
    std::optional<double> ent4;
    std::optional<double> adver;
    std::optional<double> ppl;
    long sample_count = 0;
    std::string config_fingerprint;
};

inline nlohmann::ordered_json report_to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["entropy_units"] = "nats";
    auto put = [&j](const char* key, const std::optional<double>& v) {
        if (v.has_value())
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("bleu2", r.bleu2);
    put("dist1", r.dist1);
    put("dist2", r.dist2);
    put("ent4", r.ent4);
    put("adver", r.adver);
    put("ppl", r.ppl);
    j["sample_count"] = r.sample_count;
    j["config_fingerprint"] = r.config_fingerprint;
    return j;
}

inline MetricsReport report_from_json(const nlohmann::ordered_json& j) {
    if (j.value("schema", 0) != 1) throw IoError("report: unsupported schema");
    MetricsReport r;
    auto get = [&j](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j[key].is_null()) return std::nullopt;
        return j[key].get<double>();
    };
    r.bleu2 = get("bleu2");
    r.dist1 = get("dist1");
    r.dist2 = get("dist2");
    r.ent4 = get("ent4");
    r.adver = get("adver");
    r.ppl = get("ppl");
    r.sample_count = j.value("sample_count", 0L);
    r.config_fingerprint = j.value("config_fingerprint", "");
    return r;
}

inline void emit_report(const MetricsReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("report: cannot open " + path + " for writing");
    out << report_to_json(r).dump(2) << "\n";
    if (!out) throw IoError("report: write failed for " + path);
}

inline MetricsReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("report: cannot open " + path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("report: parse error in " + path + ": " + e.what());
    }
    return report_from_json(j);
}

// CSV mirror of the report, reference-table column order first.
inline std::string report_csv(const MetricsReport& r) {
    auto fmt = [](const std::optional<double>& v) -> std::string {
        if (!v.has_value()) return "";
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6g", *v);
        return buf;
    };
    std::string s = "bleu2,dist1,dist2,ent4,adver,ppl,sample_count\n";
    s += fmt(r.bleu2) + "," + fmt(r.dist1) + "," + fmt(r.dist2) + "," + fmt(r.ent4) + "," +
         fmt(r.adver) + "," + fmt(r.ppl) + "," + std::to_string(r.sample_count) + "\n";
    return s;
}

}  // namespace btseq
