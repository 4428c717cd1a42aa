#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

namespace lexrag {

enum class ErrorKind {
    // ingest
    MalformedPdf,
    EncryptedPdf,
    NoTextLayer,
    EmptyDocument,
    // chunker
    InvalidConfig,
    // embedder / remote backends
    RemoteUnavailable,
    RemoteProtocol,
    Timeout,
    DimMismatch,
    // vecstore
    StoreLocked,
    CorruptStore,
    IoFailure,
    // rerank kernels
    EmptyInput,
    ShapeMismatch,
    InvalidDistribution,
    EmptyDataset,
    NonFiniteLoss,
    // rag
    EmptyIndex,
    BudgetTooSmall,
    NoContext,
    // evalkit
    EmptyRelevant,
    EmptyGoldSet,
    // server
    BindFailure,
    BadRequest,
    NotFound,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind; `detail` holds optional
/// structured context (e.g. the retrieval list when generation fails).
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, nlohmann::json detail = nullptr)
        : std::runtime_error(message), kind_(kind), detail_(std::move(detail)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const nlohmann::json& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    nlohmann::json detail_;
};

}  // namespace lexrag
