// Copyright 2026 The Chorus Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Entity linking by anchor voting.
//
// Mentions are looked up in an anchor dictionary built from a hyperlinked
// encyclopedia. Every anchor carries how often it occurs as link text
// (link probability) and which pages it points to (commonness). Each
// candidate of a mention then collects votes from the candidates of nearby
// mentions, weighted by inlink-overlap relatedness; candidates within a band
// of the best vote compete on commonness. A final pruning score combines
// link probability with coherence to the other selections.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/ner.hpp"
#include "chorus/textproc.hpp"

namespace chorus {
namespace nel {

using EntityId = std::string;

// Normalized anchor text: lowercase tokens joined by single spaces, so that
// "Tesla,  Inc." and "tesla , inc ." share a key.
inline std::string AnchorKey(std::string_view text) {
  std::string key;
  for (const Token &t : Tokenize(text).tokens) {
    if (!key.empty()) key += ' ';
    key += util::ToLowerUtf8(t.text);
  }
  return key;
}

struct EntityRecord {
  std::string title;
  std::vector<EntityId> inlinks;  // sorted, unique
};

// Anchor dictionary plus link graph. Immutable once loaded; safe to share
// across threads.
class KnowledgeBase {
 public:
  // Entities must be added before any anchor or inlink that refers to them.
  void AddEntity(const EntityId &id, std::string title) {
    entities_[id].title = std::move(title);
  }

  void SetInlinks(const EntityId &id, std::vector<EntityId> inlinks) {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw ValidationError("inlinks for unknown entity " + id);
    std::sort(inlinks.begin(), inlinks.end());
    inlinks.erase(std::unique(inlinks.begin(), inlinks.end()), inlinks.end());
    it->second.inlinks = std::move(inlinks);
  }

  // Anchor text is normalized on the way in.
  void AddAnchor(std::string_view anchor, const EntityId &target, std::uint64_t count) {
    if (!entities_.count(target))
      throw ValidationError("anchor target is not an entity: " + target);
    std::string key = AnchorKey(anchor);
    max_anchor_tokens_ = std::max<std::size_t>(
        max_anchor_tokens_, std::count(key.begin(), key.end(), ' ') + 1);
    anchors_[key][target] += count;
  }

  void SetAnchorFrequency(std::string_view anchor, std::uint64_t total) {
    anchor_freq_[AnchorKey(anchor)] = total;
  }

  void SetTotalPages(std::uint64_t w) { total_pages_ = w; }

  // Checks the cross-table invariants; throws ValidationError.
  void Validate() const {
    if (total_pages_ == 0) throw ValidationError("total page count W must be positive");
    if (total_pages_ < entities_.size())
      throw ValidationError("W is smaller than the number of entities");
    for (const auto &[anchor, targets] : anchors_) {
      auto f = anchor_freq_.find(anchor);
      if (f == anchor_freq_.end())
        throw ValidationError("anchor without frequency: " + anchor);
      if (LinkedCount(anchor) > f->second)
        throw ValidationError("anchor linked more often than it occurs: " + anchor);
    }
  }

  const EntityRecord *Find(const EntityId &id) const {
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : &it->second;
  }
  const std::map<EntityId, EntityRecord> &entities() const { return entities_; }
  const std::map<std::string, std::map<EntityId, std::uint64_t>> &anchors() const {
    return anchors_;
  }
  const std::map<std::string, std::uint64_t> &anchor_frequencies() const {
    return anchor_freq_;
  }
  std::uint64_t total_pages() const { return total_pages_; }

  // Targets of a normalized anchor, or nullptr.
  const std::map<EntityId, std::uint64_t> *Targets(const std::string &anchor) const {
    auto it = anchors_.find(anchor);
    return it == anchors_.end() ? nullptr : &it->second;
  }

  std::uint64_t LinkedCount(const std::string &anchor) const {
    const auto *t = Targets(anchor);
    std::uint64_t n = 0;
    if (t)
      for (const auto &[id, c] : *t) n += c;
    return n;
  }

  // Longest anchor, in tokens.
  std::size_t max_anchor_tokens() const { return max_anchor_tokens_; }

  // Reads entities.tsv, inlinks.tsv, anchors.tsv, anchor_freq.tsv, meta.tsv.
  static KnowledgeBase LoadDirectory(const std::filesystem::path &dir);
  // Writes the same five files, sorted by first column.
  void SaveDirectory(const std::filesystem::path &dir) const;

 private:
  std::map<EntityId, EntityRecord> entities_;
  std::map<std::string, std::map<EntityId, std::uint64_t>> anchors_;
  std::map<std::string, std::uint64_t> anchor_freq_;
  std::uint64_t total_pages_ = 0;
  std::size_t max_anchor_tokens_ = 0;
};

struct LinkParams {
  double lp_min = 0.1;
  double epsilon = 0.3;
  double rho_min = 0.2;
  // Mentions within this many sentences of the voter take part in its vote.
  // Negative means the whole document.
  int context_sentences = 1;

  void Validate() const {
    for (double v : {lp_min, epsilon, rho_min})
      if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("link parameters must lie in [0,1]");
  }
};

// Fraction of an anchor's textual occurrences that are links. nullopt means
// the text is not an anchor at all, which is different from probability 0.
inline std::optional<double> LinkProbability(const KnowledgeBase &kb, const std::string &anchor) {
  const auto &freq = kb.anchor_frequencies();
  auto it = freq.find(anchor);
  if (it == freq.end() || it->second == 0) return std::nullopt;
  return static_cast<double>(kb.LinkedCount(anchor)) / static_cast<double>(it->second);
}

// P(entity | anchor is a link). Zero for non-targets; throws NotFoundError for
// unknown anchors.
inline double Commonness(const KnowledgeBase &kb, const std::string &anchor, const EntityId &e) {
  const auto *targets = kb.Targets(anchor);
  if (!targets) throw NotFoundError("not an anchor: " + anchor);
  std::uint64_t total = kb.LinkedCount(anchor);
  auto it = targets->find(e);
  if (it == targets->end() || total == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(total);
}

// Inlink-overlap relatedness:
//   1 - (log max(|A|,|B|) - log |A∩B|) / (log W - log min(|A|,|B|))
// clamped to [0,1], with 0 for empty or disjoint inlink sets. Depends only on
// the three set sizes, so it is symmetric by construction.
inline double RelatednessFromCounts(std::uint64_t a, std::uint64_t b, std::uint64_t common,
                                    std::uint64_t total_pages) {
  if (a == 0 || b == 0 || common == 0) return 0.0;
  const double hi = static_cast<double>(std::max(a, b));
  const double lo = static_cast<double>(std::min(a, b));
  const double num = std::log(hi) - std::log(static_cast<double>(common));
  const double den = std::log(static_cast<double>(total_pages)) - std::log(lo);
  if (den <= 0.0) return num <= 0.0 ? 1.0 : 0.0;
  return std::clamp(1.0 - num / den, 0.0, 1.0);
}

inline double Relatedness(const KnowledgeBase &kb, const EntityId &a, const EntityId &b) {
  const EntityRecord *ra = kb.Find(a);
  const EntityRecord *rb = kb.Find(b);
  if (!ra || !rb) throw NotFoundError("unknown entity in relatedness");
  const auto &A = ra->inlinks;
  const auto &B = rb->inlinks;
  if (A.empty() || B.empty()) return 0.0;
  if (a == b) return 1.0;
  std::uint64_t common = 0;
  for (auto i = A.begin(), j = B.begin(); i != A.end() && j != B.end();) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return RelatednessFromCounts(A.size(), B.size(), common, kb.total_pages());
}

struct Candidate {
  EntityId entity;
  double commonness = 0.0;
};

struct CandidateSet {
  ner::EntityMention mention;
  std::string anchor;  // normalized surface
  double link_probability = 0.0;
  std::vector<Candidate> candidates;  // sorted by entity id
};

// Looks every mention up in the anchor dictionary. Mentions whose surface is
// not an anchor, or whose link probability is below lp_min, are dropped.
inline std::vector<CandidateSet> GenerateCandidates(const KnowledgeBase &kb,
                                                    std::span<const ner::EntityMention> mentions,
                                                    const LinkParams &params) {
  std::vector<CandidateSet> out;
  for (const ner::EntityMention &m : mentions) {
    std::string anchor = AnchorKey(m.surface);
    const auto *targets = kb.Targets(anchor);
    auto lp = LinkProbability(kb, anchor);
    if (!targets || !lp || *lp < params.lp_min) continue;
    CandidateSet cs;
    cs.mention = m;
    cs.anchor = anchor;
    cs.link_probability = *lp;
    for (const auto &[id, count] : *targets)
      cs.candidates.push_back({id, Commonness(kb, anchor, id)});
    out.push_back(std::move(cs));
  }
  return out;
}

// Spots anchors directly in raw text: the longest token n-gram that is an
// anchor is taken at each position, left to right, without overlaps. Spotted
// mentions are typed OTHER.
inline std::vector<ner::EntityMention> SpotAnchors(const KnowledgeBase &kb, std::string_view text) {
  TokenizedText tt = Tokenize(text);
  std::vector<ner::EntityMention> out;
  const std::size_t max_len = kb.max_anchor_tokens();
  const auto sentences = tt.Sentences();
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto [b, e] = sentences[s];
    for (std::size_t i = b; i < e;) {
      std::size_t matched = 0;
      std::string phrase;
      for (std::size_t len = 1; len <= max_len && i + len <= e; ++len) {
        if (len > 1) phrase += ' ';
        phrase += util::ToLowerUtf8(tt.tokens[i + len - 1].text);
        if (kb.Targets(phrase)) matched = len;
      }
      if (matched == 0) {
        ++i;
        continue;
      }
      ner::EntityMention m;
      m.token_start = i;
      m.token_end = i + matched;
      m.char_start = tt.tokens[i].start;
      m.char_end = tt.tokens[i + matched - 1].end;
      m.type = ner::EntityType::kOther;
      m.surface = tt.source.substr(tt.tokens[i].byte_start,
                                   tt.tokens[i + matched - 1].byte_end - tt.tokens[i].byte_start);
      m.sentence = s;
      out.push_back(std::move(m));
      i += matched;
    }
  }
  return out;
}

struct LinkedEntity {
  ner::EntityMention mention;
  std::string anchor;
  EntityId entity;
  double link_probability = 0.0;
  double commonness = 0.0;
  double vote = 0.0;
  double rho = 0.0;
  bool accepted = false;
};

inline bool InContext(const CandidateSet &a, const CandidateSet &b, const LinkParams &params) {
  if (params.context_sentences < 0) return true;
  std::size_t sa = a.mention.sentence, sb = b.mention.sentence;
  std::size_t gap = sa > sb ? sa - sb : sb - sa;
  return gap <= static_cast<std::size_t>(params.context_sentences);
}

// Votes for one candidate from every other mention in context:
//   sum over m' of [sum over e' in cand(m') of rel(e, e') * commonness(m', e')] / |cand(m')|
inline double Vote(const KnowledgeBase &kb, std::span<const CandidateSet> sets, std::size_t m,
                   const EntityId &e, const LinkParams &params) {
  double vote = 0.0;
  for (std::size_t o = 0; o < sets.size(); ++o) {
    if (o == m || !InContext(sets[m], sets[o], params) || sets[o].candidates.empty()) continue;
    double inner = 0.0;
    for (const Candidate &c : sets[o].candidates)
      inner += Relatedness(kb, e, c.entity) * c.commonness;
    vote += inner / static_cast<double>(sets[o].candidates.size());
  }
  return vote;
}

// Disambiguation by threshold: keep candidates whose vote is at least
// (1 - epsilon) times the best vote, then pick the highest commonness among
// them (ties to the smallest entity id).
inline std::vector<LinkedEntity> VoteAndDisambiguate(const KnowledgeBase &kb,
                                                     std::span<const CandidateSet> sets,
                                                     const LinkParams &params) {
  params.Validate();
  std::vector<LinkedEntity> out;
  for (std::size_t m = 0; m < sets.size(); ++m) {
    const CandidateSet &cs = sets[m];
    if (cs.candidates.empty()) continue;
    std::vector<double> votes(cs.candidates.size(), 0.0);
    if (cs.candidates.size() > 1)
      for (std::size_t i = 0; i < votes.size(); ++i)
        votes[i] = Vote(kb, sets, m, cs.candidates[i].entity, params);
    const double best = *std::max_element(votes.begin(), votes.end());
    const double floor = (1.0 - params.epsilon) * best;
    std::size_t pick = cs.candidates.size();
    for (std::size_t i = 0; i < votes.size(); ++i) {
      if (votes[i] < floor) continue;
      // Candidates are sorted by id, so strict > keeps the smallest id on ties.
      if (pick == cs.candidates.size() ||
          cs.candidates[i].commonness > cs.candidates[pick].commonness)
        pick = i;
    }
    LinkedEntity le;
    le.mention = cs.mention;
    le.anchor = cs.anchor;
    le.entity = cs.candidates[pick].entity;
    le.link_probability = cs.link_probability;
    le.commonness = cs.candidates[pick].commonness;
    le.vote = votes[pick];
    out.push_back(std::move(le));
  }
  return out;
}

// rho = (link probability + coherence) / 2, where coherence is the mean
// relatedness of the selected entity to the selections of every other mention
// in the document (0 when there are none). accepted iff rho >= rho_min.
inline void Prune(const KnowledgeBase &kb, std::vector<LinkedEntity> &linked,
                  const LinkParams &params) {
  params.Validate();
  std::vector<double> coherence(linked.size(), 0.0);
  for (std::size_t i = 0; i < linked.size(); ++i) {
    if (linked.size() < 2) break;
    double sum = 0.0;
    for (std::size_t j = 0; j < linked.size(); ++j)
      if (j != i) sum += Relatedness(kb, linked[i].entity, linked[j].entity);
    coherence[i] = sum / static_cast<double>(linked.size() - 1);
  }
  for (std::size_t i = 0; i < linked.size(); ++i) {
    linked[i].rho = (linked[i].link_probability + coherence[i]) / 2.0;
    linked[i].accepted = linked[i].rho >= params.rho_min;
  }
}

// Full pipeline over the mentions of one document.
inline std::vector<LinkedEntity> LinkMentions(const KnowledgeBase &kb,
                                              std::span<const ner::EntityMention> mentions,
                                              const LinkParams &params) {
  auto sets = GenerateCandidates(kb, mentions, params);
  auto linked = VoteAndDisambiguate(kb, sets, params);
  Prune(kb, linked, params);
  return linked;
}

// Share of candidate mentions that ended up with an accepted link.
inline double LinkedFraction(std::size_t mentions, std::size_t accepted) {
  if (mentions == 0) throw ParameterError("linked fraction undefined for zero mentions");
  return static_cast<double>(accepted) / static_cast<double>(mentions);
}

// ---------------------------------------------------------------------------
// KB files

namespace internal {

inline std::vector<std::vector<std::string>> ReadTsv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view v = util::StripCR(line);
    if (v.empty()) continue;
    rows.push_back(util::Split(v, '\t'));
  }
  return rows;
}

inline std::uint64_t ParseCount(const std::string &s, const std::string &where) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(where + ": bad count '" + s + "'", 0);
  return std::stoull(s);
}

}  // namespace internal

inline KnowledgeBase KnowledgeBase::LoadDirectory(const std::filesystem::path &dir) {
  KnowledgeBase kb;
  for (const auto &row : internal::ReadTsv(dir / "entities.tsv")) {
    if (row.size() != 2) throw ParseError("entities.tsv: expected 2 columns", 0);
    kb.AddEntity(row[0], row[1]);
  }
  if (std::filesystem::exists(dir / "inlinks.tsv")) {
    for (const auto &row : internal::ReadTsv(dir / "inlinks.tsv")) {
      if (row.size() != 2) throw ParseError("inlinks.tsv: expected 2 columns", 0);
      std::vector<EntityId> ids;
      for (auto &id : util::Split(row[1], ' '))
        if (!id.empty()) ids.push_back(std::move(id));
      kb.SetInlinks(row[0], std::move(ids));
    }
  }
  for (const auto &row : internal::ReadTsv(dir / "anchors.tsv")) {
    if (row.size() != 3) throw ParseError("anchors.tsv: expected 3 columns", 0);
    kb.AddAnchor(row[0], row[1], internal::ParseCount(row[2], "anchors.tsv"));
  }
  for (const auto &row : internal::ReadTsv(dir / "anchor_freq.tsv")) {
    if (row.size() != 2) throw ParseError("anchor_freq.tsv: expected 2 columns", 0);
    kb.SetAnchorFrequency(row[0], internal::ParseCount(row[1], "anchor_freq.tsv"));
  }
  auto meta = internal::ReadTsv(dir / "meta.tsv");
  for (const auto &row : meta) {
    if (row.size() == 2 && row[0] == "W") kb.SetTotalPages(internal::ParseCount(row[1], "meta.tsv"));
    else if (row.size() == 1) kb.SetTotalPages(internal::ParseCount(row[0], "meta.tsv"));
  }
  kb.Validate();
  return kb;
}

inline void KnowledgeBase::SaveDirectory(const std::filesystem::path &dir) const {
  std::filesystem::create_directories(dir);
  std::ostringstream ent, inl, anc, freq;
  for (const auto &[id, rec] : entities_) {
    ent << id << '\t' << rec.title << '\n';
    if (rec.inlinks.empty()) continue;
    inl << id << '\t';
    for (std::size_t i = 0; i < rec.inlinks.size(); ++i)
      inl << (i ? " " : "") << rec.inlinks[i];
    inl << '\n';
  }
  for (const auto &[a, targets] : anchors_)
    for (const auto &[id, n] : targets) anc << a << '\t' << id << '\t' << n << '\n';
  for (const auto &[a, n] : anchor_freq_) freq << a << '\t' << n << '\n';
  util::WriteFile((dir / "entities.tsv").string(), ent.str());
  util::WriteFile((dir / "inlinks.tsv").string(), inl.str());
  util::WriteFile((dir / "anchors.tsv").string(), anc.str());
  util::WriteFile((dir / "anchor_freq.tsv").string(), freq.str());
  util::WriteFile((dir / "meta.tsv").string(), "W\t" + std::to_string(total_pages_) + "\n");
}

// ---------------------------------------------------------------------------
// Building a KB from hyperlinked pages

struct Page {
  EntityId id;
  std::string title;
  // Wiki-style markup: "[[Target]]" or "[[Target|anchor text]]".
  std::string text;
};

// Builds the anchor dictionary and link graph. Every page is an entity and W
// is the page count. An anchor's frequency is the number of times its token
// sequence occurs anywhere in the rendered page texts, linked or not. Links
// to pages that do not exist are ignored.
inline KnowledgeBase BuildKnowledgeBase(std::span<const Page> pages) {
  KnowledgeBase kb;
  std::set<EntityId> ids;
  for (const Page &p : pages) {
    if (!ids.insert(p.id).second) throw ValidationError("duplicate page id " + p.id);
    kb.AddEntity(p.id, p.title);
  }
  std::map<EntityId, std::set<EntityId>> inlinks;
  std::vector<std::string> rendered;
  for (const Page &p : pages) {
    std::string plain;
    const std::string &t = p.text;
    std::size_t pos = 0;
    while (pos < t.size()) {
      std::size_t open = t.find("[[", pos);
      if (open == std::string::npos) {
        plain.append(t, pos, std::string::npos);
        break;
      }
      std::size_t close = t.find("]]", open + 2);
      if (close == std::string::npos) {
        plain.append(t, pos, std::string::npos);
        break;
      }
      plain.append(t, pos, open - pos);
      std::string inner = t.substr(open + 2, close - open - 2);
      std::size_t bar = inner.find('|');
      std::string target = bar == std::string::npos ? inner : inner.substr(0, bar);
      std::string anchor = bar == std::string::npos ? inner : inner.substr(bar + 1);
      plain += anchor;
      if (ids.count(target) && !AnchorKey(anchor).empty()) {
        kb.AddAnchor(anchor, target, 1);
        if (target != p.id) inlinks[target].insert(p.id);
      }
      pos = close + 2;
    }
    rendered.push_back(std::move(plain));
  }
  for (auto &[id, set] : inlinks) kb.SetInlinks(id, {set.begin(), set.end()});

  // Occurrence counts of every anchor's token sequence.
  std::map<std::string, std::uint64_t> freq;
  for (const auto &[a, t] : kb.anchors()) freq[a] = 0;
  const std::size_t max_len = kb.max_anchor_tokens();
  for (const std::string &text : rendered) {
    TokenizedText tt = Tokenize(text);
    std::vector<std::string> lower;
    for (const Token &tok : tt.tokens) lower.push_back(util::ToLowerUtf8(tok.text));
    for (std::size_t i = 0; i < lower.size(); ++i) {
      std::string phrase;
      for (std::size_t len = 1; len <= max_len && i + len <= lower.size(); ++len) {
        if (len > 1) phrase += ' ';
        phrase += lower[i + len - 1];
        auto it = freq.find(phrase);
        if (it != freq.end()) ++it->second;
      }
    }
  }
  for (const auto &[a, n] : freq)
    kb.SetAnchorFrequency(a, std::max<std::uint64_t>(n, kb.LinkedCount(a)));
  kb.SetTotalPages(std::max<std::uint64_t>(1, pages.size()));
  kb.Validate();
  return kb;
}

}  // namespace nel
}  // namespace chorus
