// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "svcdisc/chat.hpp"

namespace svcdisc::detail {

/// Usage counters for offline providers, measured with the default tokenizer.
TokenUsage estimate_usage(const ChatRequest& request, const ChatMessage& reply);

}  // namespace svcdisc::detail
