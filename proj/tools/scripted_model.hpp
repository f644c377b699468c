#pragma once

// Deterministic stand-in for the chat model, used to record the shipped
// cassettes and to drive engine tests without a network. It recognises the
// three prompt kinds by their fixed wording and answers from per-document
// tables tuned to the fixture corpus in fixtures/corpus/mini.pubtator.

#include <memory>
#include <string>
#include <string_view>

#include "gforge/llm_gateway.hpp"

namespace gforge::scripted {

// Present in every revision the scripted moderator writes; the scripted
// annotator switches to its corrected answers when the guideline contains it.
inline constexpr std::string_view kRevisionMarker = "label each occurrence by its own role";

std::string respond(const std::string& prompt);
std::unique_ptr<ChatBackend> make_backend(const std::string& model = "gpt-4o", double temperature = 0.0);

}  // namespace gforge::scripted
