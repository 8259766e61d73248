//! Shows what the normalizer strips from raw posts.
use hatemod::normalize;

fn main() {
    for raw in [
        "@user check https://t.co/x 😀 go away",
        "  Ｃａｆé   ROCKS!!  #Morning ",
        "RT @a @b: see www.example.com/page 🔥🔥",
    ] {
        let n = normalize(raw);
        println!("{raw:?}\n  -> {:?} ({} words)", n.as_str(), n.words().count());
    }
}
