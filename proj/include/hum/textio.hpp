#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hum/common.hpp"
#include "hum/corpus.hpp"

// Text-side plumbing: vocabulary with reserved control tokens, construction of
// encoder inputs (compression prompt + item titles + trailing summary token),
// and target-domain history masking.

namespace hum {

// Instruction prepended to every encoder input. The encoder is trained so the
// position read out at the end of the input summarizes everything before it.
inline const std::string kCompressionPrompt =
    "Compress the following description about the user or item into the last token:";

inline std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

class Vocabulary {
  public:
    static constexpr const char* kUnk = "[UNK]";
    static constexpr const char* kPad = "[PAD]";
    static constexpr const char* kUser = "[USER]";

    // Corpus title tokens ordered by (frequency desc, token asc) from id 0,
    // then prompt-only tokens in order of first appearance, then the control
    // tokens. [USER] always holds the final id.
    static Vocabulary build(const Corpus& corpus, int min_count = 1) {
        if (min_count < 1) throw std::invalid_argument("Vocabulary: min_count must be >= 1");
        Vocabulary v;
        v.min_count_ = min_count;

        std::map<std::string, std::size_t> freq;
        for (const auto& [id, item] : corpus.items)
            for (const auto& tok : split_whitespace(item.title)) ++freq[tok];

        std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [tok, n] : ranked)
            if (n >= static_cast<std::size_t>(min_count)) v.push(tok);

        for (const auto& tok : split_whitespace(kCompressionPrompt))
            if (!v.token_to_id_.count(tok)) v.push(tok);

        v.unk_id_ = v.push(kUnk);
        v.pad_id_ = v.push(kPad);
        v.user_id_ = v.push(kUser);
        v.prompt_ids_ = v.lookup_all(split_whitespace(kCompressionPrompt));
        return v;
    }

    int size() const { return static_cast<int>(id_to_token_.size()); }
    int unk_id() const { return unk_id_; }
    int pad_id() const { return pad_id_; }
    int user_id() const { return user_id_; }
    int min_count() const { return min_count_; }
    const std::vector<int>& prompt_ids() const { return prompt_ids_; }
    const std::string& token(int id) const { return id_to_token_.at(static_cast<std::size_t>(id)); }

    int id_of(const std::string& tok) const {
        auto it = token_to_id_.find(tok);
        return it == token_to_id_.end() ? unk_id_ : it->second;
    }

    std::vector<int> tokenize(std::string_view text) const {
        return lookup_all(split_whitespace(text));
    }

    // Stable fingerprint of the full id assignment, for checkpoint guards.
    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64("vocab/v1");
        for (const auto& tok : id_to_token_) {
            h = fnv1a64(tok, h);
            h = fnv1a64("\x1f", h);
        }
        return h;
    }

    void save(const std::string& path) const {
        nlohmann::json tokens = nlohmann::json::object();
        for (int i = 0; i < size(); ++i) tokens[id_to_token_[static_cast<std::size_t>(i)]] = i;
        nlohmann::json doc{{"tokens", tokens},
                           {"specials", {{"unk", unk_id_}, {"pad", pad_id_}, {"user", user_id_}}},
                           {"min_count", min_count_}};
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        out << doc.dump(2) << "\n";
    }

    static Vocabulary load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error("vocabulary file " + path + " is not valid JSON: " + e.what());
        }
        if (!doc.contains("tokens") || !doc["tokens"].is_object())
            throw std::runtime_error("vocabulary file " + path + " lacks a tokens object");

        Vocabulary v;
        const auto& tokens = doc["tokens"];
        v.id_to_token_.assign(tokens.size(), {});
        for (const auto& [tok, idj] : tokens.items()) {
            if (!idj.is_number_integer())
                throw std::runtime_error("vocabulary entry " + tok + " has a non-integer id");
            const auto id = idj.get<long long>();
            if (id < 0 || id >= static_cast<long long>(tokens.size()))
                throw std::runtime_error("vocabulary entry " + tok + " has out-of-range id");
            auto& slot = v.id_to_token_[static_cast<std::size_t>(id)];
            if (!slot.empty())
                throw std::runtime_error("vocabulary ids are not a permutation: id " +
                                         std::to_string(id) + " assigned twice");
            slot = tok;
            v.token_to_id_.emplace(tok, static_cast<int>(id));
        }

        auto special = [&](const char* name, const char* tok) {
            auto it = v.token_to_id_.find(tok);
            if (it == v.token_to_id_.end())
                throw std::runtime_error("vocabulary file " + path + " lacks the " +
                                         std::string(tok) + " token");
            if (doc.contains("specials") && doc["specials"].contains(name) &&
                doc["specials"][name].get<int>() != it->second)
                throw std::runtime_error("vocabulary specials entry " + std::string(name) +
                                         " disagrees with the tokens map");
            return it->second;
        };
        v.unk_id_ = special("unk", kUnk);
        v.pad_id_ = special("pad", kPad);
        v.user_id_ = special("user", kUser);
        if (v.user_id_ != v.size() - 1)
            throw std::runtime_error("vocabulary file " + path + ": " + kUser +
                                     " must hold the final id");
        v.min_count_ = doc.value("min_count", 1);
        v.prompt_ids_ = v.lookup_all(split_whitespace(kCompressionPrompt));
        return v;
    }

  private:
    int push(const std::string& tok) {
        const int id = size();
        id_to_token_.push_back(tok);
        token_to_id_.emplace(tok, id);
        return id;
    }

    std::vector<int> lookup_all(const std::vector<std::string>& toks) const {
        std::vector<int> ids;
        ids.reserve(toks.size());
        for (const auto& t : toks) ids.push_back(id_of(t));
        return ids;
    }

    std::vector<std::string> id_to_token_;
    std::unordered_map<std::string, int> token_to_id_;
    std::vector<int> prompt_ids_;
    int unk_id_ = -1, pad_id_ = -1, user_id_ = -1;
    int min_count_ = 1;
};

struct InputFlags {
    bool no_prompt = false;
    // Moves the readout to the last title token. The trailing summary token is
    // still present; under causal attention it cannot influence earlier
    // positions, so this is exactly "no dedicated summary token".
    bool no_user_token = false;
};

struct ModelInput {
    std::vector<int> token_ids;
    int user_token_pos = -1; // -1 when the input carries no summary token
    int readout_pos = 0;
    std::vector<int> domain_tags; // per position; -1 for prompt and control tokens
};

// Encoder input for a user history: [prompt] [title_1 ... title_L] [USER].
// Oldest whole items are dropped first when the input would exceed max_len.
inline ModelInput build_user_input(const Vocabulary& vocab, const Corpus& corpus,
                                   const UserSequence& seq, int max_len,
                                   const InputFlags& flags = {}) {
    if (seq.history.empty()) throw std::invalid_argument("build_user_input: empty history");

    const std::size_t prompt_len = flags.no_prompt ? 0 : vocab.prompt_ids().size();
    std::vector<std::vector<int>> titles;
    titles.reserve(seq.history.size());
    std::size_t total = prompt_len + 1; // trailing summary token
    for (const auto& h : seq.history) {
        titles.push_back(vocab.tokenize(corpus.items.at(h.item).title));
        total += titles.back().size();
    }

    std::size_t first = 0;
    while (first + 1 < titles.size() && total > static_cast<std::size_t>(max_len))
        total -= titles[first++].size();
    if (total > static_cast<std::size_t>(max_len))
        throw std::invalid_argument("build_user_input: prompt plus item " +
                                    seq.history.back().item + " needs " + std::to_string(total) +
                                    " tokens, max_len is " + std::to_string(max_len));

    ModelInput in;
    in.token_ids.reserve(total);
    in.domain_tags.reserve(total);
    if (!flags.no_prompt)
        for (int id : vocab.prompt_ids()) {
            in.token_ids.push_back(id);
            in.domain_tags.push_back(-1);
        }
    for (std::size_t i = first; i < titles.size(); ++i)
        for (int id : titles[i]) {
            in.token_ids.push_back(id);
            in.domain_tags.push_back(seq.history[i].domain);
        }
    in.token_ids.push_back(vocab.user_id());
    in.domain_tags.push_back(-1);
    in.user_token_pos = static_cast<int>(in.token_ids.size()) - 1;
    in.readout_pos = flags.no_user_token ? in.user_token_pos - 1 : in.user_token_pos;
    return in;
}

// Encoder input for a single item: [prompt] [title]; read out at the last
// title token. Items carry no summary token.
inline ModelInput build_item_input(const Vocabulary& vocab, const Item& item, int max_len,
                                   const InputFlags& flags = {}) {
    const std::vector<int> title = vocab.tokenize(item.title);
    if (title.empty()) throw std::invalid_argument("build_item_input: empty title for " + item.id);
    const std::size_t prompt_len = flags.no_prompt ? 0 : vocab.prompt_ids().size();
    if (prompt_len + title.size() > static_cast<std::size_t>(max_len))
        throw std::invalid_argument("build_item_input: prompt plus item " + item.id + " needs " +
                                    std::to_string(prompt_len + title.size()) +
                                    " tokens, max_len is " + std::to_string(max_len));
    ModelInput in;
    if (!flags.no_prompt)
        for (int id : vocab.prompt_ids()) {
            in.token_ids.push_back(id);
            in.domain_tags.push_back(-1);
        }
    for (int id : title) {
        in.token_ids.push_back(id);
        in.domain_tags.push_back(item.domain);
    }
    in.user_token_pos = -1;
    in.readout_pos = static_cast<int>(in.token_ids.size()) - 1;
    return in;
}

// Drops each target-domain history item independently with probability r.
// Consumes exactly one uniform draw per target-domain item when r > 0 and no
// draws when r == 0, so r == 0 reproduces the unmasked sequence bit for bit.
// If every history item would be dropped, the most recent one is kept so the
// sequence stays encodable.
inline UserSequence mask_history(const UserSequence& seq, double r, rng_t& rng) {
    if (r < 0.0 || r > 1.0) throw std::invalid_argument("mask_history: r must be in [0,1]");
    if (r == 0.0) return seq;

    UserSequence out = seq;
    out.history.clear();
    for (const auto& h : seq.history) {
        if (h.domain == seq.target_domain && uniform01(rng) < r) continue;
        out.history.push_back(h);
    }
    if (out.history.empty()) out.history.push_back(seq.history.back());
    return out;
}

} // namespace hum
