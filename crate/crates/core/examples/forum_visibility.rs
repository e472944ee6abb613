//! Shows one thread from a student's and an instructor's point of view.
//! Command comments and unpublished drafts stay hidden from students, and
//! anonymous posts carry a per-thread alias instead of the author.

use chrono::{TimeZone, Utc};
use draftdesk::desk::Action;
use draftdesk::forum::{Role, UserId, UserRef};
use draftdesk::provider::MockProvider;
use draftdesk::{Desk, DeskConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mock = MockProvider::new(0, 64);
    let mut desk = Desk::new(DeskConfig::default(), Default::default());
    let student = UserRef {
        user_id: UserId::new("sam"),
        role: Role::Student,
    };
    let teacher = UserRef {
        user_id: UserId::new("prof"),
        role: Role::Instructor,
    };
    desk.forum_mut().register_user(student.clone())?;
    desk.forum_mut().register_user(teacher.clone())?;

    let at = |s: i64| Utc.timestamp_opt(1_720_000_000 + s, 0).unwrap();
    let thread = desk
        .forum_mut()
        .create_thread(
            &student.user_id,
            "Push rejected",
            "git push says the remote contains work I do not have.",
            at(0),
        )?
        .thread_id;
    desk.submit_comment(
        thread,
        &student.user_id,
        "I also tried --force, same thing.",
        true,
        at(10),
    )?;
    let sub = desk.submit_comment(thread, &teacher.user_id, "#anon #reply be gentle", false, at(20))?;
    if let Action::Reply(plan) = sub.action {
        desk.generate_draft(&plan, &mock, at(30))?;
    }

    for viewer in [&student, &teacher] {
        let view = desk.forum().render_view(thread, viewer)?;
        println!("as {} ({:?}): {}", viewer.user_id, viewer.role, view.title);
        for entry in std::iter::once(&view.question).chain(&view.comments) {
            let body: String = entry.body.chars().take(60).collect();
            println!(
                "  [{:?}] {}: {}",
                entry.visibility,
                entry.display_name,
                body.replace('\n', " ")
            );
        }
    }
    Ok(())
}
