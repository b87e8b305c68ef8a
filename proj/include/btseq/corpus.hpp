#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "btseq/errors.hpp"
#include "btseq/metrics.hpp"
#include "btseq/model.hpp"
#include "btseq/rng.hpp"
#include "btseq/tokens.hpp"

namespace btseq {

// ---- tokenization -------------------------------------------------------

// CJK Unified Ideographs plus Extension A; these segment per character,
// everything else splits on whitespace.
inline bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF);
}

namespace detail {

inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
    const auto fail = [&i] { throw InputError("tokenize: invalid UTF-8 at byte " + std::to_string(i)); };
    const unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int extra;
    char32_t cp;
    if ((b0 & 0xE0) == 0xC0) {
        extra = 1;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        extra = 2;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        extra = 3;
        cp = b0 & 0x07;
    } else {
        fail();
        return 0;
    }
    for (int k = 1; k <= extra; ++k) {
        if (i + static_cast<std::size_t>(k) >= s.size()) fail();
        const unsigned char b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) fail();
        cp = (cp << 6) | (b & 0x3F);
    }
    // reject overlong encodings and invalid ranges
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000)) fail();
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail();
    i += static_cast<std::size_t>(extra) + 1;
    return cp;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_space_cp(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v';
}

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        const char32_t cp = detail::decode_utf8(text, i);
        if (detail::is_space_cp(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            continue;
        }
        if (is_cjk(cp)) {
            if (!current.empty()) {
                tokens.push_back(std::move(current));
                current.clear();
            }
            std::string one;
            detail::append_utf8(one, cp);
            tokens.push_back(std::move(one));
            continue;
        }
        detail::append_utf8(current, cp);
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

// ---- filtering ----------------------------------------------------------

struct FilterConfig {
    int min_tokens = 10;
    int max_tokens = 30;
    std::vector<std::vector<std::string>> blocklist;  // tokenized phrases
    std::optional<long> min_likes;                    // applies only to utterances carrying metadata

    void validate() const {
        if (min_tokens <= 0 || min_tokens > max_tokens)
            throw ConfigError("filter: need 0 < min_tokens <= max_tokens");
    }
};

struct RawUtterance {
    std::string text;
    std::vector<std::string> tokens;
    std::optional<long> likes;
};

enum class RejectReason { TooShort, TooLong, Blocklist, LowLikes };

struct FilterStats {
    long kept = 0;
    long too_short = 0;
    long too_long = 0;
    long blocklist = 0;
    long low_likes = 0;

    long rejected() const { return too_short + too_long + blocklist + low_likes; }
};

namespace detail {

inline std::string fold_ascii(const std::string& tok) {
    std::string out = tok;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool contains_phrase(const std::vector<std::string>& tokens,
                            const std::vector<std::string>& phrase) {
    if (phrase.empty() || phrase.size() > tokens.size()) return false;
    for (std::size_t start = 0; start + phrase.size() <= tokens.size(); ++start) {
        bool hit = true;
        for (std::size_t k = 0; k < phrase.size(); ++k) {
            if (fold_ascii(tokens[start + k]) != fold_ascii(phrase[k])) {
                hit = false;
                break;
            }
        }
        if (hit) return true;
    }
    return false;
}

}  // namespace detail

// Keeps utterances within the token-length band, free of blocklisted
// phrases and above the like threshold when metadata is present.
inline std::pair<std::vector<RawUtterance>, FilterStats> filter_corpus(
    const std::vector<RawUtterance>& utterances, const FilterConfig& cfg) {
    cfg.validate();
    std::vector<RawUtterance> kept;
    FilterStats stats;
    for (const RawUtterance& u : utterances) {
        const int len = static_cast<int>(u.tokens.size());
        if (len < cfg.min_tokens) {
            ++stats.too_short;
            continue;
        }
        if (len > cfg.max_tokens) {
            ++stats.too_long;
            continue;
        }
        if (cfg.min_likes.has_value() && u.likes.has_value() && *u.likes < *cfg.min_likes) {
            ++stats.low_likes;
            continue;
        }
        bool blocked = false;
        for (const auto& phrase : cfg.blocklist)
            if (detail::contains_phrase(u.tokens, phrase)) {
                blocked = true;
                break;
            }
        if (blocked) {
            ++stats.blocklist;
            continue;
        }
        kept.push_back(u);
        ++stats.kept;
    }
    return {std::move(kept), stats};
}

// ---- vocabulary -----------------------------------------------------------

struct Vocab {
    std::vector<std::string> id_to_token;  // ids 0..3 are the specials
    std::unordered_map<std::string, int> token_to_id;
    std::vector<long> counts;

    int size() const { return static_cast<int>(id_to_token.size()); }

    int encode_token(const std::string& tok) const {
        auto it = token_to_id.find(tok);
        return it == token_to_id.end() ? kUnkId : it->second;
    }

    TokenSeq encode(const std::vector<std::string>& tokens) const {
        TokenSeq out;
        out.reserve(tokens.size());
        for (const std::string& t : tokens) out.push_back(encode_token(t));
        return out;
    }

    std::string decode(const TokenSeq& ids) const {
        std::vector<std::string> toks;
        for (int id : ids) {
            if (id < 0 || id >= size()) throw InputError("vocab: id out of range");
            toks.push_back(id_to_token[static_cast<std::size_t>(id)]);
        }
        return join_tokens(toks);
    }

    // Tokens at or above min_count get ids in descending frequency order
    // (ties broken lexicographically); the rest fall to UNK.
    static Vocab build(const std::vector<std::vector<std::string>>& token_lists, long min_count = 5) {
        std::map<std::string, long> freq;
        for (const auto& toks : token_lists)
            for (const std::string& t : toks) freq[t] += 1;
        std::vector<std::pair<std::string, long>> entries(freq.begin(), freq.end());
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        Vocab v;
        for (int id = 0; id < kNumSpecialTokens; ++id) {
            v.id_to_token.push_back(special_token_text(id));
            v.counts.push_back(0);
        }
        for (const auto& [tok, count] : entries) {
            if (count < min_count) continue;
            v.id_to_token.push_back(tok);
            v.counts.push_back(count);
        }
        for (int id = 0; id < v.size(); ++id) v.token_to_id[v.id_to_token[static_cast<std::size_t>(id)]] = id;
        return v;
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("vocab: cannot open " + path + " for writing");
        for (int id = 0; id < size(); ++id)
            out << id_to_token[static_cast<std::size_t>(id)] << "\t" << id << "\t"
                << counts[static_cast<std::size_t>(id)] << "\n";
        if (!out) throw IoError("vocab: write failed for " + path);
    }

    static Vocab load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("vocab: cannot open " + path);
        Vocab v;
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::istringstream ls(line);
            std::string tok, id_s, count_s;
            if (!std::getline(ls, tok, '\t') || !std::getline(ls, id_s, '\t') || !std::getline(ls, count_s))
                throw IoError("vocab: " + path + ":" + std::to_string(lineno) + ": expected token<TAB>id<TAB>count");
            const int id = std::stoi(id_s);
            if (id != static_cast<int>(v.id_to_token.size()))
                throw IoError("vocab: " + path + ":" + std::to_string(lineno) + ": ids must be dense and ordered");
            v.id_to_token.push_back(tok);
            v.counts.push_back(std::stol(count_s));
        }
        if (v.size() < kNumSpecialTokens) throw IoError("vocab: " + path + " is missing special tokens");
        for (int id = 0; id < v.size(); ++id) v.token_to_id[v.id_to_token[static_cast<std::size_t>(id)]] = id;
        return v;
    }

    std::uint64_t fingerprint() const {
        std::string blob;
        for (int id = 0; id < size(); ++id) {
            blob += id_to_token[static_cast<std::size_t>(id)];
            blob += '\t';
            blob += std::to_string(counts[static_cast<std::size_t>(id)]);
            blob += '\n';
        }
        return fnv1a64(blob);
    }
};

// ---- corpora --------------------------------------------------------------

struct TextPair {
    std::string context;
    std::string response;
};

struct PairedCorpus {
    std::vector<PairedExample> items;  // source = context, target = response
    std::string split;                 // train / valid / test
};

struct MonoCorpus {
    std::vector<TokenSeq> items;
};

inline std::vector<TextPair> read_pairs_tsv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("pairs: cannot open " + path);
    std::vector<TextPair> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw InputError("pairs: " + path + ":" + std::to_string(lineno) +
                             ": expected exactly context<TAB>response");
        TextPair p{line.substr(0, tab), line.substr(tab + 1)};
        if (p.context.empty() || p.response.empty())
            throw InputError("pairs: " + path + ":" + std::to_string(lineno) + ": empty field");
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<std::string> read_mono_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("mono: cannot open " + path);
    std::vector<std::string> out;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty())
            throw InputError("mono: " + path + ":" + std::to_string(lineno) + ": empty utterance");
        out.push_back(line);
    }
    return out;
}

inline std::vector<std::vector<std::string>> read_blocklist(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("blocklist: cannot open " + path);
    std::vector<std::vector<std::string>> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> toks = tokenize(line);
        if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
}

inline void write_pairs_tsv(const std::string& path, const std::vector<TextPair>& pairs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("pairs: cannot open " + path + " for writing");
    for (const TextPair& p : pairs) out << p.context << "\t" << p.response << "\n";
    if (!out) throw IoError("pairs: write failed for " + path);
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const std::string& l : lines) out << l << "\n";
    if (!out) throw IoError("write failed for " + path);
}

inline TokenSeq truncate_seq(TokenSeq seq, int max_len) {
    if (static_cast<int>(seq.size()) > max_len) seq.resize(static_cast<std::size_t>(max_len));
    return seq;
}

inline PairedCorpus encode_pairs(const std::vector<TextPair>& pairs, const Vocab& vocab, int max_len,
                                 std::string split) {
    PairedCorpus c;
    c.split = std::move(split);
    for (const TextPair& p : pairs) {
        PairedExample ex;
        ex.source = truncate_seq(vocab.encode(tokenize(p.context)), max_len);
        ex.target = truncate_seq(vocab.encode(tokenize(p.response)), max_len);
        if (ex.source.empty() || ex.target.empty()) throw InputError("encode_pairs: empty sequence");
        c.items.push_back(std::move(ex));
    }
    return c;
}

inline MonoCorpus encode_mono(const std::vector<std::string>& lines, const Vocab& vocab, int max_len) {
    MonoCorpus c;
    for (const std::string& l : lines) {
        TokenSeq seq = truncate_seq(vocab.encode(tokenize(l)), max_len);
        if (seq.empty()) throw InputError("encode_mono: empty sequence");
        c.items.push_back(std::move(seq));
    }
    return c;
}

// Sequences above max_len are cut, then grouped into fixed-size padded
// batches with PAD masks.
inline std::vector<TokenBatch> truncate_and_batch(const std::vector<TokenSeq>& seqs, int max_len,
                                                  int batch_size) {
    if (batch_size < 1) throw ConfigError("batch: batch_size must be >= 1");
    std::vector<TokenBatch> out;
    std::vector<TokenSeq> pending;
    for (const TokenSeq& s : seqs) {
        pending.push_back(truncate_seq(s, max_len));
        if (static_cast<int>(pending.size()) == batch_size) {
            out.push_back(TokenBatch::from_rows(pending));
            pending.clear();
        }
    }
    if (!pending.empty()) out.push_back(TokenBatch::from_rows(pending));
    return out;
}

// ---- synthetic corpora -----------------------------------------------------

// Desk-scale stand-in for the scraped corpora: a paired corpus whose
// responses are dominated by a handful of generic templates, plus a
// monologue corpus over the same topic vocabulary with far richer
// phrasing, so back-translation has a measurable diversity gap to close.
struct SynthSpec {
    int pair_train = 96;
    int pair_valid = 16;
    int pair_test = 32;
    int mono_count = 160;
    int num_topics = 12;
    double generic_prob = 0.8;  // chance a gold response is a generic template
    double required_gap = 1.0;  // Ent-4(mono) - Ent-4(gold responses), nats

    void validate() const {
        if (pair_train < 0 || pair_valid < 0 || pair_test < 0 || mono_count < 0)
            throw ConfigError("synth: sizes must be >= 0");
        if (num_topics < 1) throw ConfigError("synth: num_topics must be >= 1");
        if (generic_prob < 0.0 || generic_prob > 1.0) throw ConfigError("synth: generic_prob in [0,1]");
    }
};

struct SynthCorpus {
    std::vector<TextPair> train, valid, test;
    std::vector<std::string> mono;
    double paired_ent4 = 0.0;
    double mono_ent4 = 0.0;
};

namespace detail {

inline const std::vector<std::string>& synth_topics() {
    static const std::vector<std::string> v{"garden",  "music",  "coffee", "winter", "books",  "trains",
                                            "rivers",  "cities", "stars",  "bread",  "storms", "jackets",
                                            "lanterns", "meadows", "harbors", "violins"};
    return v;
}

inline const std::vector<std::string>& synth_adjectives() {
    static const std::vector<std::string> v{"quiet", "bright", "strange", "warm",  "heavy", "gentle",
                                            "sharp", "pale",   "wild",    "faint", "proud", "golden"};
    return v;
}

inline const std::vector<std::string>& synth_nouns() {
    static const std::vector<std::string> v{"morning", "smoke", "glass",  "wind", "honey", "stone",
                                            "paper",   "snow",  "velvet", "iron", "amber", "clay"};
    return v;
}

inline const std::vector<std::string>& synth_generic_responses() {
    static const std::vector<std::string> v{"i do not know about that", "that is nice i guess",
                                            "ok sure sounds good"};
    return v;
}

inline double ent4_of_texts(const std::vector<std::string>& texts) {
    std::unordered_map<std::string, int> dict;
    std::vector<TokenSeq> seqs;
    for (const std::string& t : texts) {
        TokenSeq seq;
        for (const std::string& tok : tokenize(t)) {
            auto [it, fresh] = dict.emplace(tok, static_cast<int>(dict.size()));
            (void)fresh;
            seq.push_back(it->second);
        }
        seqs.push_back(std::move(seq));
    }
    return ent_n(seqs, 4);
}

}  // namespace detail

inline SynthCorpus synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng = Rng::substream(seed, "synth");
    const auto& topics = detail::synth_topics();
    const auto& adjs = detail::synth_adjectives();
    const auto& nouns = detail::synth_nouns();
    const auto& generics = detail::synth_generic_responses();
    const int T = std::min<int>(spec.num_topics, static_cast<int>(topics.size()));

    auto make_context = [&](int topic) {
        static const std::vector<std::string> frames{"tell me about the", "what do you think of the",
                                                     "any thoughts on the"};
        return frames[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(frames.size())))] + " " +
               topics[static_cast<std::size_t>(topic)];
    };
    auto make_gold_response = [&](int topic) {
        if (rng.uniform() < spec.generic_prob)
            return generics[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(generics.size())))];
        return "the " + topics[static_cast<std::size_t>(topic)] + " is fine i think";
    };
    auto make_mono = [&](int topic) {
        const std::string& a = adjs[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(adjs.size())))];
        const std::string& b = adjs[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(adjs.size())))];
        const std::string& n = nouns[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(nouns.size())))];
        switch (rng.uniform_int(3)) {
            case 0: return "the " + topics[static_cast<std::size_t>(topic)] + " feels " + a + " and " + b +
                           " like " + n;
            case 1: return "nothing beats the " + a + " " + topics[static_cast<std::size_t>(topic)] +
                           " under " + b + " " + n;
            default: return "every " + topics[static_cast<std::size_t>(topic)] + " carries " + a + " " + n +
                            " through the " + b + " hours";
        }
    };

    SynthCorpus out;
    auto fill_pairs = [&](int count, std::vector<TextPair>& dst) {
        for (int i = 0; i < count; ++i) {
            const int topic = rng.uniform_int(T);
            dst.push_back({make_context(topic), make_gold_response(topic)});
        }
    };
    fill_pairs(spec.pair_train, out.train);
    fill_pairs(spec.pair_valid, out.valid);
    fill_pairs(spec.pair_test, out.test);
    for (int i = 0; i < spec.mono_count; ++i) out.mono.push_back(make_mono(rng.uniform_int(T)));

    if (!out.train.empty() && !out.mono.empty()) {
        std::vector<std::string> responses;
        for (const TextPair& p : out.train) responses.push_back(p.response);
        out.paired_ent4 = detail::ent4_of_texts(responses);
        out.mono_ent4 = detail::ent4_of_texts(out.mono);
        if (out.mono_ent4 - out.paired_ent4 < spec.required_gap)
            throw ConfigError("synth: achievable diversity gap " +
                              std::to_string(out.mono_ent4 - out.paired_ent4) + " is below the requested " +
                              std::to_string(spec.required_gap));
    }
    return out;
}

// ---- retrieval baseline ------------------------------------------------------

// Candidate utterances embedded as the unit-normalized mean of the
// backward model's input embeddings; cosine prefilter then backward
// rerank.
struct RetrievalIndex {
    std::vector<TokenSeq> candidates;
    std::vector<std::vector<double>> vectors;
    int prefilter_k = 200;
};

namespace detail {

inline std::vector<double> mean_embedding(const Seq2SeqPair& model, const TokenSeq& seq) {
    const Tensor& emb = model.embedding.value;
    std::vector<double> v(static_cast<std::size_t>(emb.cols()), 0.0);
    if (seq.empty()) throw InputError("retrieval: empty sequence");
    for (int id : seq) {
        if (id < 0 || id >= emb.rows()) throw InputError("retrieval: token id out of vocabulary");
        for (int j = 0; j < emb.cols(); ++j) v[static_cast<std::size_t>(j)] += emb.at(id, j);
    }
    double norm = 0.0;
    for (double& x : v) {
        x /= static_cast<double>(seq.size());
        norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

}  // namespace detail

inline RetrievalIndex build_retrieval_index(const Seq2SeqPair& backward_model, const MonoCorpus& candidates,
                                            int prefilter_k = 200) {
    if (prefilter_k < 1) throw ConfigError("retrieval: prefilter_k must be >= 1");
    RetrievalIndex idx;
    idx.prefilter_k = prefilter_k;
    for (const TokenSeq& c : candidates.items) {
        idx.candidates.push_back(c);
        idx.vectors.push_back(detail::mean_embedding(backward_model, c));
    }
    return idx;
}

struct RetrievalResult {
    int index = -1;
    TokenSeq response;
    double backward_logprob = 0.0;
};

// Cosine top-k prefilter on mean embeddings, then argmax of the backward
// model's log P(context | candidate); ties fall to the lower candidate
// index at both stages.
inline RetrievalResult retrieve_respond(const RetrievalIndex& idx, Seq2SeqPair& backward_model,
                                        const TokenSeq& context) {
    if (idx.candidates.empty()) throw InputError("retrieval: empty index");
    const std::vector<double> q = detail::mean_embedding(backward_model, context);
    std::vector<std::pair<double, int>> sims;
    sims.reserve(idx.candidates.size());
    for (std::size_t i = 0; i < idx.candidates.size(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) dot += q[j] * idx.vectors[i][j];
        sims.emplace_back(dot, static_cast<int>(i));
    }
    std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const std::size_t k = std::min<std::size_t>(sims.size(), static_cast<std::size_t>(idx.prefilter_k));

    TokenSeq scored_context = context;
    scored_context.push_back(kEosId);
    RetrievalResult best;
    for (std::size_t r = 0; r < k; ++r) {
        const int ci = sims[r].second;
        const double lp =
            sequence_logprob(backward_model, Direction::Backward,
                             idx.candidates[static_cast<std::size_t>(ci)], scored_context);
        if (best.index < 0 || lp > best.backward_logprob ||
            (lp == best.backward_logprob && ci < best.index)) {
            best.index = ci;
            best.response = idx.candidates[static_cast<std::size_t>(ci)];
            best.backward_logprob = lp;
        }
    }
    return best;
}

}  // namespace btseq
