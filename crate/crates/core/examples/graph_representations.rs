//! The three history graphs of one multi-domain timeline.

use magrec::dataset::WindowedSample;
use magrec::graph::Representation;

fn main() -> magrec::Result<()> {
    // items 1..5; domains 0,0,1,0,1; candidate in domain 0
    let sample = WindowedSample {
        user: 42,
        history: vec![(1, 0), (2, 0), (3, 1), (4, 0), (5, 1)],
        candidate_item: 9,
        candidate_domain: 0,
        label: 1,
        timestamp: 0,
    };
    for repr in Representation::ALL {
        let g = repr.build(&sample)?;
        println!("== {repr}: {} nodes, {} edges", g.len(), g.edges.len());
        g.write_dump(std::io::stdout()).expect("stdout");
    }
    Ok(())
}
