"""Regenerates the PDF fixtures under tests/fixtures/pdf/.

Requires reportlab (writer) and pypdf (independent cross-check reader).
Run from the repository root: python3 tests/fixtures/gen/make_pdf_fixtures.py
"""
import io
import os
import sys

from reportlab import rl_config

rl_config.invariant = 1  # deterministic IDs and timestamps

from reportlab.lib.pagesizes import A4
from reportlab.pdfbase import pdfmetrics
from reportlab.pdfbase.ttfonts import TTFont
from reportlab.pdfgen import canvas
from PIL import Image
import pypdf

OUT = os.path.join(os.path.dirname(__file__), "..", "pdf")
DEJAVU = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf"


def path(name):
    return os.path.join(OUT, name)


def hello():
    c = canvas.Canvas(path("hello.pdf"), pagesize=A4)
    c.setFont("Helvetica", 12)
    c.drawString(72, 720, "Hello")
    c.showPage()
    c.save()


def scanned():
    img = Image.new("L", (200, 100), color=255)
    for x in range(20, 180):
        for y in range(40, 60):
            img.putpixel((x, y), 0)
    buf = path("scan.png")
    img.save(buf)
    c = canvas.Canvas(path("scanned.pdf"), pagesize=A4)
    c.drawImage(buf, 72, 600, width=400, height=200)
    c.showPage()
    c.save()
    os.remove(buf)


def encrypted():
    c = canvas.Canvas(path("encrypted.pdf"), pagesize=A4, encrypt="secret")
    c.setFont("Helvetica", 12)
    c.drawString(72, 720, "Confidential")
    c.showPage()
    c.save()


def empty():
    # Zero-page document written by hand; reportlab always emits a page.
    objs = [
        b"<< /Type /Catalog /Pages 2 0 R >>",
        b"<< /Type /Pages /Kids [] /Count 0 >>",
    ]
    out = io.BytesIO()
    out.write(b"%PDF-1.4\n")
    offsets = []
    for i, body in enumerate(objs, start=1):
        offsets.append(out.tell())
        out.write(b"%d 0 obj\n" % i + body + b"\nendobj\n")
    xref = out.tell()
    out.write(b"xref\n0 %d\n0000000000 65535 f \n" % (len(objs) + 1))
    for off in offsets:
        out.write(b"%010d 00000 n \n" % off)
    out.write(b"trailer\n<< /Size %d /Root 1 0 R >>\nstartxref\n%d\n%%%%EOF\n" % (len(objs) + 1, xref))
    with open(path("empty.pdf"), "wb") as f:
        f.write(out.getvalue())


BODY_SUBJECTS = ["speech", "assembly", "movement", "residence", "profession", "worship", "education",
                 "property", "privacy", "petition"]
BODY_VERBS = ["protects", "secures", "guarantees", "preserves", "upholds", "recognises"]


def body_sentence(page, line):
    """Distinct wording per line, so no two body lines share a furniture key."""
    return (f"The State {BODY_VERBS[line]} {BODY_SUBJECTS[page - 1]} "
            f"for every citizen in {BODY_SUBJECTS[(page + line) % 10]} matters.")


def furniture():
    """Ten pages with a running header, footer and page number."""
    c = canvas.Canvas(path("furniture_10p.pdf"), pagesize=A4)
    c.setTitle("Constitution Excerpt")
    for p in range(1, 11):
        c.setFont("Helvetica", 9)
        c.drawString(72, 800, "THE CONSTITUTION OF INDIA")
        c.drawString(72, 786, "(Part III - Fundamental Rights)")
        c.setFont("Times-Roman", 11)
        y = 740
        for i in range(6):
            c.drawString(72, y, body_sentence(p, i))
            y -= 16
        c.setFont("Helvetica", 9)
        c.drawString(72, 60, f"Constitution of India  {p + 11}")
        c.drawString(290, 40, f"- {p} -")
        c.showPage()
    c.save()


def unicode_font():
    """TrueType subset font: exercises ToUnicode maps and curly quotes."""
    pdfmetrics.registerFont(TTFont("DejaVu", DEJAVU))
    c = canvas.Canvas(path("unicode.pdf"), pagesize=A4)
    c.setFont("DejaVu", 12)
    c.drawString(72, 720, "“Equality” before law — Article 14")
    c.drawString(72, 700, "Second line")
    c.showPage()
    c.save()


def two_column_words():
    """Words drawn as separate strings on one baseline, right one first."""
    c = canvas.Canvas(path("positioned.pdf"), pagesize=A4)
    c.setFont("Helvetica", 12)
    c.drawString(200, 700, "world")
    c.drawString(72, 700, "Hello")
    c.drawString(72, 680, "Next line")
    c.showPage()
    c.save()


def main():
    os.makedirs(OUT, exist_ok=True)
    hello()
    scanned()
    encrypted()
    empty()
    furniture()
    unicode_font()
    two_column_words()

    # Independent cross-check of the text-bearing fixtures.
    for name in ["hello.pdf", "furniture_10p.pdf", "unicode.pdf", "positioned.pdf"]:
        reader = pypdf.PdfReader(path(name))
        print(name, [p.extract_text() for p in reader.pages][:2])
    reader = pypdf.PdfReader(path("empty.pdf"))
    print("empty.pdf pages:", len(reader.pages))
    print("encrypted.pdf is_encrypted:", pypdf.PdfReader(path("encrypted.pdf")).is_encrypted)
    print("scanned.pdf text:", repr(pypdf.PdfReader(path("scanned.pdf")).pages[0].extract_text()))


if __name__ == "__main__":
    sys.exit(main())
