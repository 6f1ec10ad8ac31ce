# Generated by Django 5.2.7 on 2025-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("green", "Green function"),
                            ("functionals", "Reduced functionals"),
                            ("ansatz", "Ansatz"),
                            ("solve", "Solve"),
                            ("classify", "Classify"),
                            ("reduce_sweep", "Reduced sweep"),
                        ],
                        max_length=20,
                    ),
                ),
                ("config_hash", models.CharField(db_index=True, max_length=64)),
                ("config_text", models.TextField()),
                (
                    "branch",
                    models.CharField(
                        blank=True,
                        choices=[("bubbling", "Bubbling"), ("maximal", "Maximal")],
                        max_length=10,
                    ),
                ),
                ("output_dir", models.CharField(max_length=500)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("RUNNING", "Running"),
                            ("COMPLETED", "Completed"),
                            ("FAILED", "Failed"),
                        ],
                        default="RUNNING",
                        max_length=10,
                    ),
                ),
                ("exit_code", models.IntegerField(blank=True, null=True)),
                ("label", models.CharField(blank=True, max_length=20)),
                ("message", models.TextField(blank=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "verbose_name": "Experiment Run",
                "verbose_name_plural": "Experiment Runs",
                "db_table": "experiment_runs",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="SolveRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("eps", models.FloatField()),
                ("mu", models.FloatField(blank=True, null=True)),
                ("converged", models.BooleanField(default=False)),
                ("iterations", models.IntegerField(default=0)),
                ("residual", models.FloatField(blank=True, null=True)),
                ("flux_defect", models.FloatField(blank=True, null=True)),
                ("sup_v", models.FloatField(blank=True, null=True)),
                ("mean_u", models.FloatField(blank=True, null=True)),
                ("branch_label", models.CharField(blank=True, max_length=20)),
                ("field_path", models.CharField(blank=True, max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="solves",
                        to="experiments.experimentrun",
                    ),
                ),
            ],
            options={
                "verbose_name": "Solve Record",
                "verbose_name_plural": "Solve Records",
                "db_table": "solve_records",
                "ordering": ["run", "-eps"],
            },
        ),
    ]
