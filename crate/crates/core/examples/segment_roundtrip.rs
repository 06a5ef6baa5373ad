// Split a document into paragraphs, tokens and diff units, then rebuild it
// byte for byte.

use gptsm::text_model::{reconstruct, segment};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let src = "  Forests, it seems, matter.\n\n\"Quite\" so -- and   rivers too!\n";
    let doc = segment(src);
    println!("leading whitespace: {:?}", doc.leading);
    for p in &doc.paragraphs {
        println!("paragraph {} ({} tokens)", p.index, p.tokens.len());
        for u in p.units() {
            println!("  {:<10} {:?}", format!("{:?}", u.glue), u.text);
        }
        println!("  separator {:?}", p.trailing_separator);
    }
    let back = reconstruct(&doc);
    assert_eq!(back, src);
    println!("round trip ok ({} bytes)", back.len());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
