#include "lexrag/error.hpp"

namespace lexrag {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MalformedPdf: return "malformed_pdf";
        case ErrorKind::EncryptedPdf: return "encrypted_pdf";
        case ErrorKind::NoTextLayer: return "no_text_layer";
        case ErrorKind::EmptyDocument: return "empty_document";
        case ErrorKind::InvalidConfig: return "invalid_config";
        case ErrorKind::RemoteUnavailable: return "remote_unavailable";
        case ErrorKind::RemoteProtocol: return "remote_protocol";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::DimMismatch: return "dim_mismatch";
        case ErrorKind::StoreLocked: return "store_locked";
        case ErrorKind::CorruptStore: return "corrupt_store";
        case ErrorKind::IoFailure: return "io_failure";
        case ErrorKind::EmptyInput: return "empty_input";
        case ErrorKind::ShapeMismatch: return "shape_mismatch";
        case ErrorKind::InvalidDistribution: return "invalid_distribution";
        case ErrorKind::EmptyDataset: return "empty_dataset";
        case ErrorKind::NonFiniteLoss: return "non_finite_loss";
        case ErrorKind::EmptyIndex: return "empty_index";
        case ErrorKind::BudgetTooSmall: return "budget_too_small";
        case ErrorKind::NoContext: return "no_context";
        case ErrorKind::EmptyRelevant: return "empty_relevant";
        case ErrorKind::EmptyGoldSet: return "empty_gold_set";
        case ErrorKind::BindFailure: return "bind_failure";
        case ErrorKind::BadRequest: return "bad_request";
        case ErrorKind::NotFound: return "not_found";
    }
    return "unknown";
}

}  // namespace lexrag
