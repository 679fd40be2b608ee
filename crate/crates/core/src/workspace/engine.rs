use super::{
    Command, CrossDirection, EngineConfig, EngineError, EventKind, HeldItem, Mode, RegionId, WorkspaceState,
};
use crate::artifact::{Artifact, ArtifactError, ArtifactId, Link, Space, TableArtifact, VisArtifact};
use crate::codegen::{generate_create, generate_update, CodegenMode};
use crate::kernel::{ExecStatus, KernelBackend, KernelSnapshot};
use crate::notebook::grammar::Statement;
use crate::notebook::{Cell, CellId, CellKind, Output, Pose};

/// Applies `command` atomically and returns the events it produced.
///
/// On error `state` is unchanged, and so is the kernel as long as it
/// supports snapshots.
pub fn apply(
    state: &mut WorkspaceState,
    kernel: &mut dyn KernelBackend,
    config: &EngineConfig,
    command: &Command,
) -> Result<Vec<EventKind>, EngineError> {
    let mut draft = state.clone();
    let mut ctx = Ctx {
        state: &mut draft,
        kernel,
        config,
        events: Vec::new(),
        rollback: None,
    };
    match ctx.run(command) {
        Ok(()) => {
            let events = std::mem::take(&mut ctx.events);
            *state = draft;
            Ok(events)
        }
        Err(e) => {
            if let Some(snap) = ctx.rollback.take() {
                let _ = ctx.kernel.restore(&snap);
            }
            Err(e)
        }
    }
}

struct Ctx<'a> {
    state: &'a mut WorkspaceState,
    kernel: &'a mut dyn KernelBackend,
    config: &'a EngineConfig,
    events: Vec<EventKind>,
    rollback: Option<KernelSnapshot>,
}

fn in_arena(pose: Pose) -> Result<Pose, EngineError> {
    if pose.in_arena() {
        Ok(pose)
    } else {
        Err(EngineError::OutOfArena)
    }
}

impl Ctx<'_> {
    fn emit(&mut self, event: EventKind) {
        self.events.push(event);
    }

    fn visible_cell(&self, id: &CellId) -> Result<&Cell, EngineError> {
        let cell = self
            .state
            .notebook
            .cell(id)
            .ok_or_else(|| EngineError::UnknownCell(id.clone()))?;
        if !self.state.cells_visible() {
            return Err(EngineError::NotVisible(format!("cell `{id}`")));
        }
        Ok(cell)
    }

    fn visible_artifact(&self, id: ArtifactId) -> Result<&Artifact, EngineError> {
        let a = self.state.artifact(id)?;
        if !self.state.artifact_visible(a) {
            return Err(EngineError::NotVisible(format!("artifact {id}")));
        }
        Ok(a)
    }

    fn table(&self, id: ArtifactId) -> Result<&TableArtifact, EngineError> {
        self.visible_artifact(id)?
            .as_table()
            .ok_or(EngineError::Artifact(ArtifactError::NotATable(id)))
    }

    fn table_mut(&mut self, id: ArtifactId) -> Result<&mut TableArtifact, EngineError> {
        self.table(id)?;
        match self.state.artifacts.get_mut(&id) {
            Some(Artifact::Table(t)) => Ok(t),
            _ => unreachable!("checked above"),
        }
    }

    fn vis_mut(&mut self, id: ArtifactId) -> Result<&mut VisArtifact, EngineError> {
        self.visible_artifact(id)?
            .as_vis()
            .ok_or(EngineError::Artifact(ArtifactError::NotAVis(id)))?;
        match self.state.artifacts.get_mut(&id) {
            Some(Artifact::Vis(v)) => Ok(v),
            _ => unreachable!("checked above"),
        }
    }

    fn execute_cell(&mut self, id: &CellId) -> Result<ExecStatus, EngineError> {
        let source = self.visible_cell(id)?.source().to_string();
        let result = self.kernel.execute(id, &source);
        let cell = self.state.notebook.cell_mut(id).expect("checked above");
        let error = match &result.status {
            ExecStatus::Ok => {
                cell.dirty = false;
                cell.outputs = result
                    .display
                    .iter()
                    .map(|d| Output::Display {
                        kind: d.kind,
                        axis_names: d.axis_names.clone(),
                        points: d.points,
                    })
                    .collect();
                None
            }
            ExecStatus::Error(message) => {
                cell.outputs = vec![Output::Error {
                    message: message.clone(),
                }];
                Some(message.clone())
            }
        };
        self.emit(EventKind::Execute {
            cell: id.clone(),
            ok: error.is_none(),
            error,
        });
        Ok(result.status)
    }

    /// Builds the artifact for a data or visualization cell, executing the
    /// cell first if it has unexecuted changes.
    fn spawn_from_cell(&mut self, id: &CellId, pose: Pose, space: Option<Space>) -> Result<ArtifactId, EngineError> {
        let cell = self.visible_cell(id)?;
        let kind = cell.kind();
        if !matches!(kind, CellKind::Data | CellKind::Visualization) {
            return Err(EngineError::WrongCellKind { cell: id.clone(), kind });
        }
        if cell.dirty {
            self.rollback = self.kernel.snapshot().ok();
            if let ExecStatus::Error(message) = self.execute_cell(id)? {
                return Err(EngineError::ExecutionFailed {
                    cell: id.clone(),
                    message,
                });
            }
        }
        let artifact_id = ArtifactId(self.state.next_artifact);
        let artifact = match kind {
            CellKind::Data => {
                let cell = self.state.notebook.cell(id).expect("checked above");
                let var = cell
                    .ast()
                    .statements
                    .iter()
                    .rev()
                    .filter(|s| s.is_table_statement())
                    .find_map(Statement::target)
                    .map(str::to_string)
                    .ok_or_else(|| EngineError::NoTable(id.clone()))?;
                let extract = self.kernel.extract_table(&var)?;
                Artifact::Table(TableArtifact::new(artifact_id, Some(id.clone()), extract, pose))
            }
            _ => {
                let extract = self.kernel.extract_plot(id)?;
                Artifact::Vis(VisArtifact::from_cell(artifact_id, id.clone(), extract, pose))
            }
        };
        let mut artifact = artifact;
        artifact.set_space(space);
        self.state.next_artifact += 1;
        self.state.artifacts.insert(artifact_id, artifact);
        self.state.links.push(Link {
            cell_id: id.clone(),
            artifact_id,
        });
        Ok(artifact_id)
    }

    /// Removes an artifact along with its link, any grip on it, tethers
    /// from derived visualizations and focus on it.
    fn remove_artifact(&mut self, id: ArtifactId) {
        self.state.artifacts.remove(&id);
        self.state.links.retain(|l| l.artifact_id != id);
        self.state.held.release_artifact(id);
        for a in self.state.artifacts.values_mut() {
            if let Artifact::Vis(v) = a {
                if v.origin_table == Some(id) {
                    v.origin_table = None;
                }
            }
        }
        if self.state.focus == Some(RegionId::Artifact(id)) {
            self.state.focus = None;
        }
    }

    fn put_in(&mut self, id: ArtifactId, cell_id: &CellId) -> Result<(), EngineError> {
        if self.state.mode == Mode::Separated && !self.state.cells_visible() {
            return Err(EngineError::WrongSpace(Space::NotebookSpace));
        }
        let artifact = self.state.artifact(id)?;
        if !self.state.artifact_visible(artifact) {
            return Err(EngineError::NotHeld(id));
        }
        let cell = self.visible_cell(cell_id)?;
        let result = if cell.kind() == CellKind::Empty {
            generate_create(artifact, &self.state.notebook, cell)?
        } else if artifact.origin_cell() == Some(cell_id) {
            generate_update(artifact, &self.state.notebook, cell)?
        } else {
            return Err(EngineError::InvalidTarget(cell_id.clone()));
        };
        let cell = self.state.notebook.cell_mut(cell_id).expect("checked above");
        cell.set_source(result.new_source.clone());
        cell.outputs.clear();
        self.remove_artifact(id);
        let (artifact, cell, variable, source) = (id, cell_id.clone(), result.variable, result.new_source);
        self.emit(match result.mode {
            CodegenMode::Create => EventKind::PutInCreate {
                artifact,
                cell,
                variable,
                source,
            },
            CodegenMode::Update => EventKind::PutInUpdate {
                artifact,
                cell,
                variable,
                source,
            },
        });
        Ok(())
    }

    /// Nearest empty or origin cell within snap radius; ties go to the
    /// earlier cell.
    fn snap_target(&self, artifact: &Artifact, pose: Pose) -> Option<CellId> {
        if !self.state.cells_visible() {
            return None;
        }
        let nb = &self.state.notebook;
        let mut best: Option<(f64, &CellId)> = None;
        for cell in nb.cells() {
            if cell.kind() != CellKind::Empty && artifact.origin_cell() != Some(&cell.id) {
                continue;
            }
            let d = pose.distance_to(nb.cell_position(&cell.id).expect("cell exists"));
            if d <= self.config.snap_radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, &cell.id));
            }
        }
        best.map(|(_, id)| id.clone())
    }

    /// Moves every held artifact into `space`.
    fn carry_held(&mut self, space: Space) {
        let held: Vec<ArtifactId> = self.state.held.items().map(HeldItem::artifact).collect();
        for id in held {
            if let Some(a) = self.state.artifacts.get_mut(&id) {
                a.set_space(Some(space));
            }
        }
    }

    fn drop_hidden_focus(&mut self) {
        if let Some(region) = self.state.focus.clone() {
            if !self.state.region_visible(&region).unwrap_or(false) {
                self.state.focus = None;
            }
        }
    }

    fn require_mode(&self, mode: Mode) -> Result<(), EngineError> {
        if self.state.mode == mode {
            Ok(())
        } else {
            Err(EngineError::WrongMode(mode))
        }
    }

    fn run(&mut self, command: &Command) -> Result<(), EngineError> {
        match command {
            Command::Edit { cell, source } => {
                self.visible_cell(cell)?;
                self.state
                    .notebook
                    .cell_mut(cell)
                    .expect("checked above")
                    .set_source(source.clone());
                self.emit(EventKind::Edit {
                    cell: cell.clone(),
                    source: source.clone(),
                });
            }
            Command::Execute { cell } => {
                self.execute_cell(cell)?;
            }
            Command::PullOut { cell, pose } => {
                self.require_mode(Mode::Unified)?;
                let pose = match pose {
                    Some(p) => in_arena(*p)?,
                    None => self.state.user_pose.ahead(self.config.spawn_distance).clamped(),
                };
                let artifact = self.spawn_from_cell(cell, pose, None)?;
                self.emit(EventKind::PullOut {
                    cell: cell.clone(),
                    artifact,
                    pose,
                });
            }
            Command::PutIn { artifact, cell } => self.put_in(*artifact, cell)?,
            Command::Drop { artifact, pose } => {
                let pose = in_arena(*pose)?;
                let target = self.snap_target(self.visible_artifact(*artifact)?, pose);
                match target {
                    Some(cell) => self.put_in(*artifact, &cell)?,
                    None => {
                        self.state
                            .artifacts
                            .get_mut(artifact)
                            .expect("checked above")
                            .set_pose(pose);
                        self.emit(EventKind::MoveArtifact {
                            artifact: *artifact,
                            pose,
                        });
                    }
                }
            }
            Command::Grab { hand, item } => {
                if self.state.held.get(*hand).is_some() {
                    return Err(EngineError::HandOccupied(*hand));
                }
                let a = self.visible_artifact(item.artifact())?;
                if let HeldItem::Column { table, column } = item {
                    let t = a
                        .as_table()
                        .ok_or(EngineError::Artifact(ArtifactError::NotATable(*table)))?;
                    if t.extract.column_index(column).is_none() {
                        return Err(ArtifactError::UnknownColumn(column.clone()).into());
                    }
                }
                if self.state.held.items().any(|i| i == item) {
                    return Err(EngineError::AlreadyHeld);
                }
                *self.state.held.slot(*hand) = Some(item.clone());
                self.emit(EventKind::Grab {
                    hand: *hand,
                    item: item.clone(),
                });
            }
            Command::Release { hand } => {
                let item = self
                    .state
                    .held
                    .slot(*hand)
                    .take()
                    .ok_or(EngineError::HandEmpty(*hand))?;
                self.emit(EventKind::Release { hand: *hand, item });
            }
            Command::MoveArtifact { artifact, pose } => {
                let pose = in_arena(*pose)?;
                self.visible_artifact(*artifact)?;
                self.state
                    .artifacts
                    .get_mut(artifact)
                    .expect("checked above")
                    .set_pose(pose);
                self.emit(EventKind::MoveArtifact {
                    artifact: *artifact,
                    pose,
                });
            }
            Command::MoveUser { pose } => {
                self.state.user_pose = in_arena(*pose)?;
                self.emit(EventKind::Move { pose: *pose });
            }
            Command::EnterCell { cell } => {
                self.require_mode(Mode::Separated)?;
                if self.state.active_space != Some(Space::NotebookSpace) {
                    return Err(EngineError::WrongSpace(Space::NotebookSpace));
                }
                let user = self.state.user_pose;
                let spawn = user.ahead(self.config.spawn_distance).clamped();
                let artifact = self.spawn_from_cell(cell, spawn, Some(Space::ArtifactSpace))?;
                self.carry_held(Space::ArtifactSpace);
                self.state.active_space = Some(Space::ArtifactSpace);
                self.state.portal = Some(
                    user.ahead(self.config.spawn_distance - self.config.portal_distance)
                        .clamped(),
                );
                self.drop_hidden_focus();
                self.emit(EventKind::PortalCross {
                    direction: CrossDirection::Enter,
                    cell: Some(cell.clone()),
                    artifact: Some(artifact),
                    holding: !self.state.held.is_empty(),
                });
            }
            Command::ExitPortal => {
                self.require_mode(Mode::Separated)?;
                if self.state.active_space != Some(Space::ArtifactSpace) {
                    return Err(EngineError::WrongSpace(Space::ArtifactSpace));
                }
                self.carry_held(Space::NotebookSpace);
                self.state.active_space = Some(Space::NotebookSpace);
                self.state.portal = None;
                self.drop_hidden_focus();
                self.emit(EventKind::PortalCross {
                    direction: CrossDirection::Exit,
                    cell: None,
                    artifact: None,
                    holding: !self.state.held.is_empty(),
                });
            }
            Command::SetFocus { region, dwell_ms } => {
                if !self.state.region_visible(region)? {
                    return Err(EngineError::RegionNotVisible(region.clone()));
                }
                if self.state.focus.as_ref() != Some(region) && *dwell_ms >= self.config.dwell_ms {
                    let from = self.state.focus.replace(region.clone());
                    self.emit(EventKind::FocusChange {
                        from,
                        region: region.clone(),
                        dwell_ms: *dwell_ms,
                    });
                }
            }
            Command::Sort {
                table,
                column,
                direction,
            } => {
                self.table_mut(*table)?.sort_by(column, *direction)?;
                self.emit(EventKind::Sort {
                    table: *table,
                    column: column.clone(),
                    direction: *direction,
                });
            }
            Command::Filter {
                table,
                column,
                cmp,
                threshold,
            } => {
                self.table_mut(*table)?
                    .add_filter(column, *cmp, threshold.clone())?;
                self.emit(EventKind::Filter {
                    table: *table,
                    column: column.clone(),
                    cmp: *cmp,
                    threshold: threshold.clone(),
                });
            }
            Command::RemoveFilter { table, index } => {
                self.table_mut(*table)?.remove_filter(*index)?;
                self.emit(EventKind::RemoveFilter {
                    table: *table,
                    index: *index,
                });
            }
            Command::SelectColumn { table, column } => {
                let selected = self.table_mut(*table)?.toggle_column(column)?;
                self.emit(EventKind::SelectColumn {
                    table: *table,
                    column: column.clone(),
                    selected,
                });
            }
            Command::Merge { table, columns, pose } => {
                let base = self.table(*table)?.pose;
                let pose = match pose {
                    Some(p) => in_arena(*p)?,
                    None => Pose { x: base.x + 0.5, ..base }.clamped(),
                };
                let id = ArtifactId(self.state.next_artifact);
                let vis = self.table_mut(*table)?.merge_columns(&columns.0, &columns.1, id, pose)?;
                self.state.next_artifact += 1;
                self.state.artifacts.insert(id, Artifact::Vis(vis));
                self.emit(EventKind::MergeVis {
                    table: *table,
                    vis: id,
                    columns: columns.clone(),
                    pose,
                });
            }
            Command::AddAxis { vis, table, column } => {
                let source = self.table(*table)?.clone();
                self.vis_mut(*vis)?.add_axis(&source, column)?;
                self.table_mut(*table)?.vis_columns.insert(column.clone());
                self.emit(EventKind::AddAxis {
                    vis: *vis,
                    table: *table,
                    column: column.clone(),
                });
            }
            Command::RemoveAxis { vis, index } => {
                let column = self.vis_mut(*vis)?.remove_axis(*index)?;
                self.emit(EventKind::RemoveAxis {
                    vis: *vis,
                    index: *index,
                    column,
                });
            }
            Command::RemovePoint { vis, index } => {
                self.vis_mut(*vis)?.remove_point(*index)?;
                self.emit(EventKind::RemovePoint {
                    vis: *vis,
                    index: *index,
                });
            }
            Command::ApplyVis { vis, table } => {
                self.table(*table)?;
                let mut v = self.vis_mut(*vis)?.clone();
                let rows_removed = v.apply_to_table(self.table_mut(*table)?)?;
                *self.vis_mut(*vis)? = v;
                self.emit(EventKind::ApplyVisToTable {
                    vis: *vis,
                    table: *table,
                    rows_removed,
                });
            }
            Command::Delete { artifact } => {
                self.visible_artifact(*artifact)?;
                self.remove_artifact(*artifact);
                self.emit(EventKind::Delete { artifact: *artifact });
            }
            Command::ReportAnswer { question, answer } => self.emit(EventKind::AnswerReported {
                question: question.clone(),
                answer: answer.clone(),
            }),
            Command::Complete => self.emit(EventKind::TaskComplete),
        }
        Ok(())
    }
}
