#include "ground/text.hpp"

#include "ground/util.hpp"

namespace ground::text {
namespace {

bool is_space(char32_t c) {
  switch (c) {
    case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
    case 0x00A0: case 0x1680: case 0x200B: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_emoji(char32_t c) {
  return (c >= 0x1F000 && c <= 0x1FAFF) || (c >= 0x2600 && c <= 0x27BF) ||
         (c >= 0x2300 && c <= 0x23FF) || (c >= 0x2B00 && c <= 0x2BFF) ||
         (c >= 0xFE00 && c <= 0xFE0F) || c == 0x200D || (c >= 0xE0020 && c <= 0xE007F);
}

bool is_unicode_punct(char32_t c) {
  return (c >= 0x00A1 && c <= 0x00BF) || c == 0x00D7 || c == 0x00F7 ||
         (c >= 0x2010 && c <= 0x206F) || (c >= 0x20A0 && c <= 0x20CF) ||
         (c >= 0x2190 && c <= 0x22FF) || (c >= 0x3001 && c <= 0x303F) ||
         c == 0x060C || c == 0x061B || c == 0x061F || (c >= 0x066A && c <= 0x066D) ||
         c == 0x06D4 || (c >= 0xFF01 && c <= 0xFF0F) || c == 0xFFFD;
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

bool is_letter(char32_t c) {
  if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  return !is_space(c) && !is_emoji(c) && !is_unicode_punct(c);
}

bool is_handle_char(char32_t c) {
  return c < 0x80 && (is_digit(c) || c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'));
}

bool is_tag_char(char32_t c) { return is_letter(c) || is_digit(c) || c == '_'; }

bool is_number_sep(char32_t c) { return c == '.' || c == ',' || c == ':' || c == '/' || c == '-'; }

bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019; }

bool starts_with_url(std::string_view s, std::size_t pos) {
  for (std::string_view prefix : {std::string_view("http://"), std::string_view("https://")}) {
    if (s.size() - pos >= prefix.size() && casefold(s.substr(pos, prefix.size())) == prefix) return true;
  }
  return false;
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}
  bool done(std::size_t pos) const { return pos >= s_.size(); }
  char32_t at(std::size_t pos) const { return done(pos) ? 0 : decode_utf8(s_, pos).cp; }
  std::size_t next(std::size_t pos) const { return pos + decode_utf8(s_, pos).len; }

 private:
  std::string_view s_;
};

}  // namespace

std::string_view to_string(TokenKind kind) noexcept {
  switch (kind) {
    case TokenKind::Word: return "WORD";
    case TokenKind::Hashtag: return "HASHTAG";
    case TokenKind::Mention: return "MENTION";
    case TokenKind::Url: return "URL";
    case TokenKind::Number: return "NUMBER";
    case TokenKind::Punct: return "PUNCT";
    case TokenKind::Emoji: return "EMOJI";
  }
  return "?";
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  const Cursor cur(text);
  std::size_t pos = 0;

  while (!cur.done(pos)) {
    const char32_t c = cur.at(pos);
    if (is_space(c)) {
      pos = cur.next(pos);
      continue;
    }

    const std::size_t start = pos;
    TokenKind kind;
    if (starts_with_url(text, pos)) {
      kind = TokenKind::Url;
      while (!cur.done(pos) && !is_space(cur.at(pos))) pos = cur.next(pos);
    } else if (c == '@' && is_handle_char(cur.at(cur.next(pos)))) {
      kind = TokenKind::Mention;
      pos = cur.next(pos);
      while (!cur.done(pos) && is_handle_char(cur.at(pos))) pos = cur.next(pos);
    } else if (c == '#' && is_tag_char(cur.at(cur.next(pos)))) {
      kind = TokenKind::Hashtag;
      pos = cur.next(pos);
      while (!cur.done(pos) && is_tag_char(cur.at(pos))) pos = cur.next(pos);
    } else if (is_digit(c)) {
      kind = TokenKind::Number;
      pos = cur.next(pos);
      while (!cur.done(pos)) {
        const char32_t d = cur.at(pos);
        if (is_digit(d)) {
          pos = cur.next(pos);
        } else if (is_number_sep(d) && is_digit(cur.at(cur.next(pos)))) {
          pos = cur.next(pos);
        } else {
          break;
        }
      }
    } else if (is_letter(c)) {
      kind = TokenKind::Word;
      pos = cur.next(pos);
      while (!cur.done(pos)) {
        const char32_t d = cur.at(pos);
        if (is_letter(d) || is_digit(d)) {
          pos = cur.next(pos);
        } else if (is_apostrophe(d) && is_letter(cur.at(cur.next(pos)))) {
          pos = cur.next(pos);
        } else {
          break;
        }
      }
    } else if (is_emoji(c)) {
      kind = TokenKind::Emoji;
      pos = cur.next(pos);
    } else {
      kind = TokenKind::Punct;
      pos = cur.next(pos);
      while (!cur.done(pos) && cur.at(pos) == c) pos = cur.next(pos);
    }

    Token tok;
    tok.surface = std::string(text.substr(start, pos - start));
    tok.normalized = casefold(tok.surface);
    tok.kind = kind;
    tok.span = {start, pos};
    out.push_back(std::move(tok));
  }
  return out;
}

std::vector<Token> tokens_from_surfaces(const std::vector<std::string>& surfaces) {
  std::vector<Token> out;
  out.reserve(surfaces.size());
  std::size_t offset = 0;
  for (const auto& s : surfaces) {
    const auto inner = tokenize(s);
    Token tok;
    tok.surface = s;
    tok.normalized = casefold(s);
    tok.kind = inner.size() == 1 ? inner.front().kind : TokenKind::Word;
    tok.span = {offset, offset + s.size()};
    offset += s.size() + 1;
    out.push_back(std::move(tok));
  }
  return out;
}

std::string join_surfaces(std::span<const Token> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i].surface;
  }
  return out;
}

// ---------------------------------------------------------------------------

Simplifier::Simplifier(std::vector<SimplifierRule> rules) : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (trim(r.pattern).empty()) throw ConfigError("simplifier rule " + std::to_string(i + 1) + ": empty pattern");
    if (r.replacement.empty() || contains_whitespace(r.replacement)) {
      throw ConfigError("simplifier rule '" + r.pattern + "': replacement must be a single token");
    }
    if (!index_.emplace(casefold(r.pattern), i).second) {
      throw ConfigError("simplifier: duplicate pattern '" + r.pattern + "'");
    }
  }
}

Simplifier Simplifier::load(const std::filesystem::path& path) {
  std::vector<SimplifierRule> rules;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError(path.string(), i + 1, "expected 'pattern<TAB>replacement'");
    rules.push_back({std::string(trim(cols[0])), std::string(trim(cols[1]))});
  }
  return Simplifier(std::move(rules));
}

const std::string* Simplifier::find(std::string_view folded_surface) const {
  const auto it = index_.find(std::string(folded_surface));
  return it == index_.end() ? nullptr : &rules_[it->second].replacement;
}

std::vector<Token> simplify_entities(std::vector<Token> tokens, const Simplifier& simplifier) {
  for (auto& tok : tokens) {
    if (const auto* tag = simplifier.find(casefold(tok.surface))) tok.normalized = *tag;
  }
  return tokens;
}

// ---------------------------------------------------------------------------

std::string_view to_string(PosTag tag) noexcept {
  switch (tag) {
    case PosTag::Noun: return "NOUN";
    case PosTag::Verb: return "VERB";
    case PosTag::Adj: return "ADJ";
    case PosTag::Adp: return "ADP";
    case PosTag::Det: return "DET";
    case PosTag::Propn: return "PROPN";
    case PosTag::Num: return "NUM";
    case PosTag::Other: return "OTHER";
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view s) noexcept {
  for (auto tag : {PosTag::Noun, PosTag::Verb, PosTag::Adj, PosTag::Adp, PosTag::Det, PosTag::Propn,
                   PosTag::Num, PosTag::Other}) {
    if (to_string(tag) == s) return tag;
  }
  return std::nullopt;
}

PosLexicon load_pos_lexicon(const std::filesystem::path& path) {
  PosLexicon lex;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw ParseError(path.string(), i + 1, "expected 'word<TAB>tag'");
    const auto tag = parse_pos_tag(trim(cols[1]));
    if (!tag) throw ParseError(path.string(), i + 1, "unknown tag '" + cols[1] + "'");
    lex[casefold(trim(cols[0]))] = *tag;
  }
  return lex;
}

std::vector<PosTag> coarse_pos_tag(std::span<const Token> tokens, const PosLexicon& lexicon) {
  std::vector<PosTag> tags;
  tags.reserve(tokens.size());
  bool sentence_start = true;
  for (const auto& tok : tokens) {
    PosTag tag = PosTag::Other;
    switch (tok.kind) {
      case TokenKind::Mention:
      case TokenKind::Hashtag:
        tag = PosTag::Propn;
        break;
      case TokenKind::Number:
        tag = PosTag::Num;
        break;
      case TokenKind::Word: {
        if (!sentence_start && is_ascii_upper(tok.surface.front())) {
          tag = PosTag::Propn;
        } else {
          const auto it = lexicon.find(tok.normalized);
          tag = it == lexicon.end() ? PosTag::Noun : it->second;
        }
        break;
      }
      default:
        break;
    }
    if (tok.kind == TokenKind::Word) {
      sentence_start = false;
    } else if (tok.kind == TokenKind::Punct &&
               tok.surface.find_first_of(".!?") != std::string::npos) {
      sentence_start = true;
    }
    tags.push_back(tag);
  }
  return tags;
}

}  // namespace ground::text
