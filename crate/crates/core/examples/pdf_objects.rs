//! Extracts indirect objects from a PDF, reassembles them into a fresh file
//! with an exact xref table, and validates the result.

use pathseed::pdf::{assemble_pdf, extract_objects, is_well_formed, select_root};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bodies = [
        "<< /Type /Pages /Kids [3 0 R] /Count 1 >>",
        "<< /Type /Catalog /Pages 1 0 R >>",
        "<< /Type /Page /Parent 1 0 R /Contents 4 0 R >>",
        "<< /Length 21 >>\nstream\nBT (Hello) Tj ET\n\nendstream",
    ];
    let root = select_root(&bodies);
    let pdf = assemble_pdf(&bodies, root)?;
    println!("{}", String::from_utf8_lossy(&pdf));

    let check = is_well_formed(&pdf);
    for line in &check.diagnostics {
        println!("{line}");
    }
    assert!(check.ok);

    let extraction = extract_objects(&pdf);
    for obj in &extraction.objects {
        println!("object {} {} at byte {}: {} body bytes", obj.obj_number, obj.generation, obj.offset, obj.body.len());
    }
    let back: Vec<&[u8]> = extraction.objects.iter().map(|o| o.body.as_slice()).collect();
    assert!(back.iter().zip(&bodies).all(|(a, b)| *a == b.as_bytes()));

    // A truncated copy loses its xref table and its last object.
    let cut = &pdf[..pdf.len() / 2];
    let damaged = is_well_formed(cut);
    println!("\ntruncated file well-formed: {}", damaged.ok);
    for line in damaged.diagnostics.iter().filter(|l| l.contains(":fail:")) {
        println!("{line}");
    }
    Ok(())
}
