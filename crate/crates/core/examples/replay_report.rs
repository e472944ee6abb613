//! Builds a synthetic course transcript, replays it with the mock provider
//! and prints the usage, edit and adoption reports.

use draftdesk::replay::{replay, synth, ReplayOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let fixture = synth::course(
        seed,
        &synth::CourseShape {
            students: 12,
            questions: 30,
            answered: 14,
            regenerated: 2,
            help: 6,
            under_ten: 9,
            unedited: 3,
            reply_mix: vec![
                ("reply∅ anon".into(), 10),
                ("reply■".into(), 4),
                ("reply∅ anon related".into(), 2),
            ],
        },
    );
    let report = replay(&fixture.transcript(), &ReplayOptions::with_seed(seed))?;
    print!("{}", report.render_text());
    Ok(())
}
