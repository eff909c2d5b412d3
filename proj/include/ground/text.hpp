#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ground::text {

enum class TokenKind { Word, Hashtag, Mention, Url, Number, Punct, Emoji };

std::string_view to_string(TokenKind kind) noexcept;

/// Half-open byte range [start, end) into the source text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  std::string surface;
  std::string normalized;
  TokenKind kind = TokenKind::Word;
  Span span;
  friend bool operator==(const Token&, const Token&) = default;
};

/// Twitter-aware tokenizer. Deterministic; whitespace separates tokens but is
/// never part of one. '@' runs are mentions, '#' runs hashtags, http(s):// runs
/// URLs up to the next whitespace, digit runs (with inner . , : / -) numbers,
/// letter runs words; single emoji code points and runs of one repeated
/// punctuation character make up the rest.
std::vector<Token> tokenize(std::string_view text);

/// Builds tokens for pre-split surfaces (column-format corpora). Spans assume
/// the surfaces were joined by single spaces.
std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces);

/// Joins surfaces by single spaces.
std::string join_surfaces(std::span<const Token> tokens);

// ---------------------------------------------------------------------------
// Local named-entity simplifier

struct SimplifierRule {
  std::string pattern;      // surface or mention handle, matched case-folded
  std::string replacement;  // meta-category tag, e.g. "government_entity"
};

class Simplifier {
 public:
  Simplifier() = default;
  /// Throws ConfigError on empty/duplicate patterns or a replacement with whitespace.
  explicit Simplifier(std::vector<SimplifierRule> rules);

  /// Two-column file: pattern TAB replacement, '#' comments.
  static Simplifier load(const std::filesystem::path& path);

  const std::string* find(std::string_view folded_surface) const;
  const std::vector<SimplifierRule>& rules() const noexcept { return rules_; }

 private:
  std::vector<SimplifierRule> rules_;
  std::unordered_map<std::string, std::size_t> index_;
};

std::vector<Token> simplify_entities(std::vector<Token> tokens, const Simplifier& simplifier);

// ---------------------------------------------------------------------------
// Coarse POS tagging

enum class PosTag { Noun, Verb, Adj, Adp, Det, Propn, Num, Other };

std::string_view to_string(PosTag tag) noexcept;
std::optional<PosTag> parse_pos_tag(std::string_view s) noexcept;

using PosLexicon = std::unordered_map<std::string, PosTag>;

/// Two-column file: word TAB tag.
PosLexicon load_pos_lexicon(const std::filesystem::path& path);

std::vector<PosTag> coarse_pos_tag(std::span<const Token> tokens, const PosLexicon& lexicon);

}  // namespace ground::text
