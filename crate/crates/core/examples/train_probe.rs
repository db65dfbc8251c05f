// probe: emit activity descriptions for fixture freezing
use hearthlab::activity::Activity;

fn main() {
    let activities = Activity::load_dir(std::path::Path::new("catalog")).unwrap();
    for a in &activities {
        let path = format!("crates/core/tests/fixtures/renders/{}.txt", a.name);
        std::fs::write(&path, format!("{}\n", a.description)).unwrap();
        println!("=== {} ({} groundings)\n{}\n", a.name, a.grounding_count(), a.description);
    }
}
