//! Walks one `#reply` from command to published answer: the draft is
//! generated, edited by the instructor and published anonymously.

use chrono::{TimeZone, Utc};
use draftdesk::desk::Action;
use draftdesk::forum::{Role, UserId, UserRef};
use draftdesk::provider::MockProvider;
use draftdesk::{Desk, DeskConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mock = MockProvider::new(1, 64);
    let mut desk = Desk::new(DeskConfig::default(), Default::default());
    let prof = UserId::new("prof");
    desk.forum_mut().register_user(UserRef {
        user_id: UserId::new("ana"),
        role: Role::Student,
    })?;
    desk.forum_mut().register_user(UserRef {
        user_id: prof.clone(),
        role: Role::Instructor,
    })?;

    let at = |s: i64| Utc.timestamp_opt(1_720_000_000 + s, 0).unwrap();
    let thread = desk
        .forum_mut()
        .create_thread(
            &UserId::new("ana"),
            "Tests time out",
            "cargo test hangs on the network test",
            at(0),
        )?
        .thread_id;
    let sub = desk.submit_comment(thread, &prof, "#reply #anon mention the timeout flag", false, at(5))?;
    let Action::Reply(plan) = sub.action else {
        return Err("expected a reply plan".into());
    };
    println!("label: {}", plan.label);

    let draft = desk.generate_draft(&plan, &mock, at(6))?;
    let (id, generated) = (draft.draft_id, draft.current_text.clone());
    println!("{id} {:?}\n  {generated}", draft.status);

    let edited = format!("{generated} Mark slow tests with #[ignore].");
    desk.edit_draft(id, &edited, at(20))?;
    let draft = desk.publish(id, &prof, plan.anonymous, at(30))?;
    println!("{id} {:?} edits {:?}", draft.status, draft.edit_metrics);

    for answer in desk.answers(thread)? {
        println!("answer by {:?}: {}", answer.display_identity, answer.body);
    }
    println!("\n{}", desk.usage_report().render_table());
    Ok(())
}
