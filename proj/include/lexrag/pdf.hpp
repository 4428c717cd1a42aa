#pragma once

// Text-layer PDF extraction. Supports classic and object-stream files,
// Flate/ASCII85/ASCIIHex/RunLength filters, simple and Type0 fonts with
// ToUnicode maps. Encrypted files and image-only pages are rejected.

#include <string>
#include <string_view>
#include <vector>

#include "lexrag/ingest.hpp"

namespace lexrag::ingest {

struct PdfExtraction {
    std::vector<PageText> pages;
    std::string title;  // Info dictionary /Title, if present
    std::vector<std::string> warnings;
};

/// Throws Error{MalformedPdf | EncryptedPdf | NoTextLayer | EmptyDocument}.
PdfExtraction read_pdf(std::string_view bytes);

/// One PageText per page with a text layer, in page order.
std::vector<PageText> extract_pages(std::string_view bytes);

}  // namespace lexrag::ingest
