#pragma once

// Canonical document encoding for the domain types.
//
// Every encoder emits keys in a fixed order with lowercase names; absent
// optionals are encoded as null, digests as lowercase hex. Dumped compactly
// (no insignificant whitespace) the result is the canonical byte form used
// for hashing, cache keys, event payloads and the on-disk log.

#include <string>

#include <json.hpp>

#include "sakugaflow/types.hpp"

namespace sakugaflow {

using Document = nlohmann::ordered_json;

/// Compact dump, UTF-8 passed through unescaped.
std::string dump_canonical(const Document& doc);
/// Throws Error(InvalidArgument) on malformed JSON.
Document parse_document(std::string_view text);

Document to_document(const Canvas& v);
Document to_document(const GenerationParams& v);
Document to_document(const VersionNode& v);
Document to_document(const Project& v);
Document to_document(const GenerationRequest& v);
Document to_document(const Job& v);
Document to_document(const TutorContext& v);
Document to_document(const TutorExchange& v);

// Decoders throw Error(InvalidArgument) naming the offending field.
template <typename T>
T from_document(const Document& doc);

template <> Canvas from_document<Canvas>(const Document& doc);
template <> GenerationParams from_document<GenerationParams>(const Document& doc);
template <> VersionNode from_document<VersionNode>(const Document& doc);
template <> Project from_document<Project>(const Document& doc);
template <> GenerationRequest from_document<GenerationRequest>(const Document& doc);
template <> Job from_document<Job>(const Document& doc);
template <> TutorContext from_document<TutorContext>(const Document& doc);
template <> TutorExchange from_document<TutorExchange>(const Document& doc);

/// dump_canonical(to_document(request)).
std::string canonical_request_bytes(const GenerationRequest& request);

/// Hash of the canonical request bytes; the mock generator's seed source and the cache key.
Digest request_digest(const GenerationRequest& request);

}  // namespace sakugaflow
