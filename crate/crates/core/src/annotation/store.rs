//! Annotation workflow state: assignments, submitted records and the
//! append-only event log they are rebuilt from.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gold::compute_gold_label;
use super::types::{AnnotationRecord, Assignment, GoldLabel, Pass, Status};
use crate::corpus::{Article, SampledComment};
use crate::error::{Error, Result};

/// Minimum pool: two first-pass annotators plus a distinct third.
pub const MIN_POOL: usize = 3;

/// Picks the two least-loaded annotators, ties broken by annotator id.
pub fn pick_first_pass(pool: &[String], load: impl Fn(&str) -> usize) -> Result<[String; 2]> {
    let distinct: BTreeSet<&str> = pool.iter().map(String::as_str).collect();
    if distinct.len() < MIN_POOL {
        return Err(Error::Config(format!(
            "annotator pool has {} distinct member(s), need at least {MIN_POOL}",
            distinct.len()
        )));
    }
    let mut ranked: Vec<(usize, &str)> = distinct.into_iter().map(|a| (load(a), a)).collect();
    ranked.sort();
    Ok([ranked[0].1.to_string(), ranked[1].1.to_string()])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleTask {
    pub article: Article,
    pub comments: Vec<SampledComment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SkipOutcome {
    Requeued { assignee: String },
    AlreadySkipped,
    Unresolvable,
}

/// What an annotator sees for one assignment. Earlier votes are never included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub article_id: String,
    pub outlet: String,
    pub tweet_text: String,
    pub body: String,
    pub url: String,
    pub pass: Pass,
    pub comments: Vec<SampledComment>,
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Event {
    Assign { article_id: String },
    Submit { record: AnnotationRecord },
    Skip { annotator_id: String, article_id: String },
}

#[derive(Debug)]
pub struct AnnotationStore {
    pool: Vec<String>,
    tasks: BTreeMap<String, ArticleTask>,
    comment_article: HashMap<String, String>,
    assignments: Vec<Assignment>,
    /// Keyed by (comment, annotator).
    records: BTreeMap<(String, String), AnnotationRecord>,
    unresolvable: BTreeSet<String>,
    log: Option<File>,
}

impl AnnotationStore {
    pub fn new(pool: Vec<String>, articles: Vec<Article>, sampled: Vec<SampledComment>) -> Result<Self> {
        let mut pool: Vec<String> = pool.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        pool.retain(|a| !a.is_empty());
        if pool.len() < MIN_POOL {
            return Err(Error::Config(format!(
                "annotator pool has {} member(s), need at least {MIN_POOL}",
                pool.len()
            )));
        }
        let mut by_id: HashMap<String, Article> = articles.into_iter().map(|a| (a.article_id.clone(), a)).collect();
        let mut tasks: BTreeMap<String, ArticleTask> = BTreeMap::new();
        let mut comment_article = HashMap::new();
        for c in sampled {
            if comment_article
                .insert(c.comment_id.clone(), c.article_id.clone())
                .is_some()
            {
                return Err(Error::Validation(format!("duplicate comment {}", c.comment_id)));
            }
            if !tasks.contains_key(&c.article_id) {
                let article = by_id
                    .remove(&c.article_id)
                    .ok_or_else(|| Error::NotFound(format!("article {} of comment {}", c.article_id, c.comment_id)))?;
                tasks.insert(
                    c.article_id.clone(),
                    ArticleTask {
                        article,
                        comments: Vec::new(),
                    },
                );
            }
            tasks.get_mut(&c.article_id).expect("inserted").comments.push(c);
        }
        Ok(Self {
            pool,
            tasks,
            comment_article,
            assignments: Vec::new(),
            records: BTreeMap::new(),
            unresolvable: BTreeSet::new(),
            log: None,
        })
    }

    /// Replays an existing event log, then appends every later change to it.
    pub fn attach_log(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (idx, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line).map_err(|source| Error::Record {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    source,
                })?;
                self.apply(event)?;
            }
        }
        self.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(())
    }

    fn apply(&mut self, event: Event) -> Result<()> {
        match event {
            Event::Assign { article_id } => self.create_assignments(&article_id).map(drop),
            Event::Submit { record } => self.submit(record),
            Event::Skip {
                annotator_id,
                article_id,
            } => self.skip_article(&annotator_id, &article_id).map(drop),
        }
    }

    fn append(&mut self, event: &Event) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            let mut line = serde_json::to_vec(event)?;
            line.push(b'\n');
            log.write_all(&line)?;
            log.flush()?;
        }
        Ok(())
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn tasks(&self) -> &BTreeMap<String, ArticleTask> {
        &self.tasks
    }

    pub fn assignments(&self) -> &[Assignment] {
        &self.assignments
    }

    pub fn records(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.values()
    }

    pub fn is_unresolvable(&self, article_id: &str) -> bool {
        self.unresolvable.contains(article_id)
    }

    /// Non-skipped assignments held by `annotator`.
    pub fn load(&self, annotator: &str) -> usize {
        self.assignments
            .iter()
            .filter(|a| a.annotator_id == annotator && a.status != Status::Skipped)
            .count()
    }

    fn article_assignments<'a>(&'a self, article_id: &'a str) -> impl Iterator<Item = &'a Assignment> + 'a {
        self.assignments.iter().filter(move |a| a.article_id == article_id)
    }

    fn task(&self, article_id: &str) -> Result<&ArticleTask> {
        self.tasks
            .get(article_id)
            .ok_or_else(|| Error::NotFound(format!("article {article_id}")))
    }

    fn least_loaded(&self, exclude: &HashSet<String>) -> Option<String> {
        self.pool
            .iter()
            .filter(|a| !exclude.contains(*a))
            .min_by_key(|a| (self.load(a), (*a).clone()))
            .cloned()
    }

    /// Opens the first pass of `article_id` for the two least-loaded annotators.
    pub fn create_assignments(&mut self, article_id: &str) -> Result<Vec<Assignment>> {
        self.task(article_id)?;
        if self.article_assignments(article_id).any(|a| a.pass == Pass::First) {
            return Err(Error::Precondition(format!("article {article_id} is already assigned")));
        }
        let pair = pick_first_pass(&self.pool, |a| self.load(a))?;
        let created: Vec<Assignment> = pair
            .into_iter()
            .map(|annotator_id| Assignment {
                article_id: article_id.to_string(),
                annotator_id,
                pass: Pass::First,
                status: Status::Pending,
            })
            .collect();
        self.assignments.extend(created.iter().cloned());
        self.append(&Event::Assign {
            article_id: article_id.to_string(),
        })?;
        Ok(created)
    }

    /// Assigns every article that has no first pass yet, in article id order.
    pub fn assign_all(&mut self) -> Result<usize> {
        let pending: Vec<String> = self
            .tasks
            .keys()
            .filter(|id| !self.article_assignments(id).any(|a| a.pass == Pass::First))
            .cloned()
            .collect();
        for id in &pending {
            self.create_assignments(id)?;
        }
        Ok(pending.len())
    }

    fn active_first<'a>(&'a self, article_id: &'a str) -> Vec<&'a Assignment> {
        self.article_assignments(article_id)
            .filter(|a| a.pass == Pass::First && a.status != Status::Skipped)
            .collect()
    }

    fn first_pass_complete(&self, article_id: &str) -> bool {
        let first = self.active_first(article_id);
        first.len() == 2 && first.iter().all(|a| a.status == Status::Done)
    }

    fn hateful_first_votes(&self, article_id: &str) -> Result<HashMap<String, usize>> {
        let task = self.task(article_id)?;
        let first: Vec<String> = self
            .active_first(article_id)
            .iter()
            .map(|a| a.annotator_id.clone())
            .collect();
        Ok(task
            .comments
            .iter()
            .map(|c| {
                let votes = first
                    .iter()
                    .filter(|a| {
                        self.records
                            .get(&(c.comment_id.clone(), (*a).clone()))
                            .is_some_and(|r| r.hateful)
                    })
                    .count();
                (c.comment_id.clone(), votes)
            })
            .collect())
    }

    /// Comments that at least one first-pass annotator marked hateful.
    pub fn third_pass_tasks(&self, article_id: &str) -> Result<Vec<String>> {
        self.task(article_id)?;
        if !self.first_pass_complete(article_id) {
            return Err(Error::Precondition(format!(
                "first pass of article {article_id} is not complete"
            )));
        }
        let votes = self.hateful_first_votes(article_id)?;
        Ok(self.tasks[article_id]
            .comments
            .iter()
            .filter(|c| votes[&c.comment_id] > 0)
            .map(|c| c.comment_id.clone())
            .collect())
    }

    fn required_comments(&self, assignment: &Assignment) -> Vec<String> {
        match assignment.pass {
            Pass::First => self.tasks[&assignment.article_id]
                .comments
                .iter()
                .map(|c| c.comment_id.clone())
                .collect(),
            Pass::Third => self.third_pass_tasks(&assignment.article_id).unwrap_or_default(),
        }
    }

    fn has_record(&self, annotator: &str, comment: &str) -> bool {
        self.records.contains_key(&(comment.to_string(), annotator.to_string()))
    }

    /// Marks finished assignments and opens the third pass when due.
    fn refresh(&mut self, article_id: &str) {
        for i in 0..self.assignments.len() {
            let a = &self.assignments[i];
            if a.article_id != article_id || a.status != Status::Pending {
                continue;
            }
            let finished = self
                .required_comments(a)
                .iter()
                .all(|c| self.has_record(&a.annotator_id, c));
            if finished {
                self.assignments[i].status = Status::Done;
            }
        }
        if !self.first_pass_complete(article_id) || self.unresolvable.contains(article_id) {
            return;
        }
        let has_third = self
            .article_assignments(article_id)
            .any(|a| a.pass == Pass::Third && a.status != Status::Skipped);
        if has_third || self.third_pass_tasks(article_id).map_or(true, |t| t.is_empty()) {
            return;
        }
        let exclude: HashSet<String> = self
            .article_assignments(article_id)
            .map(|a| a.annotator_id.clone())
            .collect();
        match self.least_loaded(&exclude) {
            Some(annotator_id) => self.assignments.push(Assignment {
                article_id: article_id.to_string(),
                annotator_id,
                pass: Pass::Third,
                status: Status::Pending,
            }),
            None => {
                self.unresolvable.insert(article_id.to_string());
            }
        }
    }

    /// Stores a record, replacing an earlier one by the same annotator.
    pub fn submit(&mut self, record: AnnotationRecord) -> Result<()> {
        record.validate()?;
        let article_id = self
            .comment_article
            .get(&record.comment_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("comment {}", record.comment_id)))?;
        let covered = self
            .article_assignments(&article_id)
            .filter(|a| a.annotator_id == record.annotator_id && a.status != Status::Skipped)
            .any(|a| self.required_comments(a).contains(&record.comment_id));
        if !covered {
            return Err(Error::Unauthorized(format!(
                "annotator {} has no active assignment covering comment {}",
                record.annotator_id, record.comment_id
            )));
        }
        self.append(&Event::Submit { record: record.clone() })?;
        self.records
            .insert((record.comment_id.clone(), record.annotator_id.clone()), record);
        self.refresh(&article_id);
        Ok(())
    }

    /// Gives up a pending assignment. Partial records are discarded and the
    /// article goes to an annotator who has not held it before.
    pub fn skip_article(&mut self, annotator_id: &str, article_id: &str) -> Result<SkipOutcome> {
        self.task(article_id)?;
        let held: Vec<usize> = (0..self.assignments.len())
            .filter(|&i| {
                let a = &self.assignments[i];
                a.article_id == article_id && a.annotator_id == annotator_id
            })
            .collect();
        if held.is_empty() {
            return Err(Error::Unauthorized(format!(
                "annotator {annotator_id} holds no assignment for article {article_id}"
            )));
        }
        let Some(&idx) = held.iter().find(|&&i| self.assignments[i].status == Status::Pending) else {
            if held.iter().all(|&i| self.assignments[i].status == Status::Skipped) {
                return Ok(SkipOutcome::AlreadySkipped);
            }
            return Err(Error::Precondition(format!(
                "assignment of article {article_id} to {annotator_id} is already done"
            )));
        };
        self.append(&Event::Skip {
            annotator_id: annotator_id.to_string(),
            article_id: article_id.to_string(),
        })?;
        self.assignments[idx].status = Status::Skipped;
        let pass = self.assignments[idx].pass;
        let comments: Vec<String> = self.tasks[article_id]
            .comments
            .iter()
            .map(|c| c.comment_id.clone())
            .collect();
        for c in comments {
            self.records.remove(&(c, annotator_id.to_string()));
        }
        let exclude: HashSet<String> = self
            .article_assignments(article_id)
            .map(|a| a.annotator_id.clone())
            .collect();
        let outcome = match self.least_loaded(&exclude) {
            Some(assignee) => {
                self.assignments.push(Assignment {
                    article_id: article_id.to_string(),
                    annotator_id: assignee.clone(),
                    pass,
                    status: Status::Pending,
                });
                SkipOutcome::Requeued { assignee }
            }
            None => {
                self.unresolvable.insert(article_id.to_string());
                SkipOutcome::Unresolvable
            }
        };
        self.refresh(article_id);
        Ok(outcome)
    }

    /// The oldest pending assignment of `annotator`.
    pub fn next_task(&self, annotator: &str) -> Option<TaskView> {
        let a = self
            .assignments
            .iter()
            .find(|a| a.annotator_id == annotator && a.status == Status::Pending)?;
        let task = &self.tasks[&a.article_id];
        let required: HashSet<String> = self.required_comments(a).into_iter().collect();
        let comments: Vec<SampledComment> = task
            .comments
            .iter()
            .filter(|c| required.contains(&c.comment_id))
            .cloned()
            .collect();
        let done = comments
            .iter()
            .filter(|c| self.has_record(annotator, &c.comment_id))
            .count();
        Some(TaskView {
            article_id: a.article_id.clone(),
            outlet: task.article.outlet.clone(),
            tweet_text: task.article.tweet_text.clone(),
            body: task.article.body.clone(),
            url: task.article.url.clone(),
            pass: a.pass,
            total: comments.len(),
            comments,
            done,
        })
    }

    /// Gold labels of every comment whose annotation is complete.
    pub fn gold(&self) -> Result<Vec<GoldLabel>> {
        let mut out = Vec::new();
        for (article_id, task) in &self.tasks {
            if !self.first_pass_complete(article_id) {
                continue;
            }
            let third: Option<&str> = self
                .article_assignments(article_id)
                .find(|a| a.pass == Pass::Third && a.status != Status::Skipped)
                .map(|a| a.annotator_id.as_str());
            let first: Vec<String> = self
                .active_first(article_id)
                .iter()
                .map(|a| a.annotator_id.clone())
                .collect();
            for c in &task.comments {
                let mut group: Vec<AnnotationRecord> = first
                    .iter()
                    .filter_map(|a| self.records.get(&(c.comment_id.clone(), a.clone())).cloned())
                    .collect();
                if group.iter().any(|r| r.hateful) {
                    match third.and_then(|t| self.records.get(&(c.comment_id.clone(), t.to_string()))) {
                        Some(r) => group.push(r.clone()),
                        None => continue,
                    }
                }
                out.push(compute_gold_label(&group)?);
            }
        }
        out.sort_by(|a, b| a.comment_id.cmp(&b.comment_id));
        Ok(out)
    }

    /// Re-checks stored state; returns one message per violation.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for r in self.records.values() {
            if let Err(e) = r.validate() {
                problems.push(format!("{}/{}: {e}", r.comment_id, r.annotator_id));
            }
        }
        for article_id in self.tasks.keys() {
            let first: Vec<&Assignment> = self.active_first(article_id);
            let names: HashSet<&str> = first.iter().map(|a| a.annotator_id.as_str()).collect();
            if !first.is_empty() && (first.len() != 2 || names.len() != 2) {
                problems.push(format!(
                    "article {article_id}: first pass is not two distinct annotators"
                ));
            }
            for t in self
                .article_assignments(article_id)
                .filter(|a| a.pass == Pass::Third && a.status != Status::Skipped)
            {
                if names.contains(t.annotator_id.as_str()) {
                    problems.push(format!("article {article_id}: third annotator repeats a first"));
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::Characteristic;

    fn article(id: &str) -> Article {
        Article {
            article_id: id.into(),
            outlet: "@LANACION".into(),
            tweet_text: format!("tweet {id}"),
            body: format!("body {id}"),
            url: String::new(),
            published_at: String::new(),
        }
    }

    fn store(pool: &[&str], articles: usize, comments: usize) -> AnnotationStore {
        let arts: Vec<Article> = (0..articles).map(|i| article(&format!("a{i:03}"))).collect();
        let sampled = arts
            .iter()
            .flat_map(|a| {
                (0..comments).map(move |j| SampledComment {
                    article_id: a.article_id.clone(),
                    comment_id: format!("{}-c{j}", a.article_id),
                    text: format!("comentario {j}"),
                })
            })
            .collect();
        AnnotationStore::new(pool.iter().map(|s| s.to_string()).collect(), arts, sampled).unwrap()
    }

    fn annotate_all(s: &mut AnnotationStore, annotator: &str, article: &str, hateful: &[usize]) {
        let ids: Vec<String> = s
            .next_task(annotator)
            .unwrap()
            .comments
            .iter()
            .map(|c| c.comment_id.clone())
            .collect();
        for (j, id) in ids.iter().enumerate() {
            let r = if hateful.contains(&j) {
                AnnotationRecord::hateful(annotator, id, false, [Characteristic::Racism])
            } else {
                AnnotationRecord::not_hateful(annotator, id)
            };
            s.submit(r).unwrap();
        }
        assert!(ids.iter().all(|id| id.starts_with(article)));
    }

    #[test]
    fn pool_must_allow_a_third_pass() {
        let pool = vec!["a".to_string(), "b".to_string()];
        assert!(pick_first_pass(&pool, |_| 0).is_err());
        assert!(AnnotationStore::new(pool, vec![], vec![]).is_err());
    }

    #[test]
    fn fresh_pool_assigns_least_loaded() {
        let mut s = store(&["f", "e", "d", "c", "b", "a"], 2, 3);
        let first = s.create_assignments("a000").unwrap();
        let names: Vec<_> = first.iter().map(|a| a.annotator_id.as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        let second = s.create_assignments("a001").unwrap();
        let names: Vec<_> = second.iter().map(|a| a.annotator_id.as_str()).collect();
        assert_eq!(names, ["c", "d"]);
        assert!(s.create_assignments("a001").is_err());
        assert!(s.create_assignments("nope").is_err());
    }

    #[test]
    fn first_pass_load_is_balanced() {
        let mut s = store(&["a1", "a2", "a3", "a4", "a5", "a6"], 100, 1);
        s.assign_all().unwrap();
        let loads: Vec<usize> = s.pool().iter().map(|a| s.load(a)).collect();
        let mean = 200.0 / 6.0;
        for l in loads {
            assert!((l as f64 - mean).abs() <= 1.0, "load {l} vs mean {mean}");
        }
        assert!(s.audit().is_empty());
    }

    #[test]
    fn validation_and_authorization() {
        let mut s = store(&["a", "b", "c"], 1, 2);
        s.assign_all().unwrap();
        assert!(s.submit(AnnotationRecord::not_hateful("a", "a000-c0")).is_ok());
        assert!(s
            .submit(AnnotationRecord::hateful(
                "a",
                "a000-c1",
                false,
                [Characteristic::Racism]
            ))
            .is_ok());
        assert!(matches!(
            s.submit(AnnotationRecord::hateful("a", "a000-c1", false, [])),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            s.submit(AnnotationRecord::not_hateful("c", "a000-c0")),
            Err(Error::Unauthorized(_))
        ));
        // resubmission replaces
        s.submit(AnnotationRecord::not_hateful("a", "a000-c1")).unwrap();
        assert_eq!(s.records().filter(|r| r.annotator_id == "a").count(), 2);
        assert!(s.records().all(|r| !r.hateful));
    }

    #[test]
    fn third_pass_follows_any_hateful_vote() {
        let mut s = store(&["a", "b", "c"], 1, 4);
        s.assign_all().unwrap();
        assert!(s.third_pass_tasks("a000").is_err());
        // votes per comment: c0 (H,N), c1 (N,N), c2 (H,H), c3 (N,N)
        annotate_all(&mut s, "a", "a000", &[0, 2]);
        annotate_all(&mut s, "b", "a000", &[2]);
        assert_eq!(s.third_pass_tasks("a000").unwrap(), ["a000-c0", "a000-c2"]);
        let third = s.next_task("c").unwrap();
        assert_eq!(third.pass, Pass::Third);
        assert_eq!(third.total, 2);
        // gold is only emitted for complete comments
        assert_eq!(s.gold().unwrap().len(), 2);
        annotate_all(&mut s, "c", "a000", &[]);
        let gold = s.gold().unwrap();
        assert_eq!(gold.len(), 4);
        let hateful: Vec<_> = gold
            .iter()
            .filter(|g| g.hateful)
            .map(|g| g.comment_id.as_str())
            .collect();
        assert_eq!(hateful, ["a000-c2"]);
        assert!(s.next_task("c").is_none());
    }

    #[test]
    fn skipping_requeues_and_is_idempotent() {
        let mut s = store(&["a", "b", "c", "d"], 1, 2);
        s.assign_all().unwrap();
        s.submit(AnnotationRecord::not_hateful("a", "a000-c0")).unwrap();
        let out = s.skip_article("a", "a000").unwrap();
        assert_eq!(out, SkipOutcome::Requeued { assignee: "c".into() });
        assert!(s.records().all(|r| r.annotator_id != "a"));
        assert_eq!(s.skip_article("a", "a000").unwrap(), SkipOutcome::AlreadySkipped);
        assert!(s.skip_article("zz", "a000").is_err());
        assert_eq!(
            s.skip_article("c", "a000").unwrap(),
            SkipOutcome::Requeued { assignee: "d".into() }
        );
        assert_eq!(s.skip_article("d", "a000").unwrap(), SkipOutcome::Unresolvable);
        assert!(s.is_unresolvable("a000"));
    }

    #[test]
    fn event_log_replays_to_the_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("events.jsonl");
        let mut s = store(&["a", "b", "c", "d"], 3, 2);
        s.attach_log(&log).unwrap();
        s.assign_all().unwrap();
        annotate_all(&mut s, "a", "a000", &[1]);
        s.skip_article("b", "a000").unwrap();
        let mut replayed = store(&["a", "b", "c", "d"], 3, 2);
        replayed.attach_log(&log).unwrap();
        assert_eq!(replayed.assignments(), s.assignments());
        assert_eq!(replayed.records().collect::<Vec<_>>(), s.records().collect::<Vec<_>>());
    }
}
